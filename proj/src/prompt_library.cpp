#include "litrev/prompt_library.hpp"

#include <filesystem>
#include <sstream>

#include "litrev/common.hpp"

namespace fs = std::filesystem;

namespace litrev {

namespace {

enum class EmbeddedAssetKind { prompt, checklist };

struct EmbeddedAsset {
    EmbeddedAssetKind kind;
    const char* role;
    const char* tag;
    const char* text;
};

const EmbeddedAsset kEmbeddedAssets[] = {
#include "prompt_defaults.inc"
};

const EmbeddedAsset* find_embedded(EmbeddedAssetKind kind, const std::string& role,
                                   const std::string& tag) {
    for (const auto& a : kEmbeddedAssets) {
        if (a.kind == kind && role == a.role && tag == a.tag) return &a;
    }
    return nullptr;
}

}  // namespace

PromptLibrary::PromptLibrary() = default;

PromptLibrary::PromptLibrary(std::string override_dir) : override_dir_(std::move(override_dir)) {}

std::string PromptLibrary::get(AgentRole role, const std::string& tag) const {
    std::string role_name = to_string(role);
    if (!override_dir_.empty()) {
        fs::path p = fs::path(override_dir_) / "prompts" / role_name / (tag + ".txt");
        if (file_exists(p.string())) return read_text_file(p.string());
    }
    if (const auto* a = find_embedded(EmbeddedAssetKind::prompt, role_name, tag)) {
        return a->text;
    }
    throw Error("no prompt template for " + role_name + "/" + tag);
}

std::string PromptLibrary::system_prompt(AgentRole role) const {
    return get(role, "_system");
}

std::vector<std::string> PromptLibrary::checklist(AgentRole role) const {
    std::string role_name = to_string(role);
    std::string text;
    bool found = false;
    if (!override_dir_.empty()) {
        fs::path p = fs::path(override_dir_) / "checklists" / (role_name + ".txt");
        if (file_exists(p.string())) {
            text = read_text_file(p.string());
            found = true;
        }
    }
    if (!found) {
        if (const auto* a = find_embedded(EmbeddedAssetKind::checklist, role_name, "")) {
            text = a->text;
            found = true;
        }
    }
    std::vector<std::string> lines;
    if (!found) return lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (!t.empty()) lines.push_back(std::move(t));
    }
    return lines;
}

std::string PromptLibrary::render(const std::string& template_text,
                                  const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(template_text.size());
    size_t i = 0;
    while (i < template_text.size()) {
        char c = template_text[i];
        if (c == '{') {
            size_t close = template_text.find('}', i + 1);
            if (close != std::string::npos) {
                std::string key = template_text.substr(i + 1, close - i - 1);
                auto it = vars.find(key);
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += c;
        ++i;
    }
    return out;
}

}  // namespace litrev
