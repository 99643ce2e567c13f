#include "litrev/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include <httplib.h>

namespace fs = std::filesystem;

namespace litrev {

std::string to_string(FetchedFrom from) {
    return from == FetchedFrom::fulltext ? "fulltext" : "abstract-fallback";
}

FetchedFrom fetched_from_string(std::string_view name) {
    if (name == "fulltext") return FetchedFrom::fulltext;
    if (name == "abstract-fallback") return FetchedFrom::abstract_fallback;
    throw SchemaError("unknown fetched_from: " + std::string(name));
}

// ---------------------------------------------------------------------------
// DefaultTextFetcher
// ---------------------------------------------------------------------------

DefaultTextFetcher::DefaultTextFetcher(Options options, Logger logger)
    : options_(std::move(options)), logger_(std::move(logger)) {}

namespace {

bool is_http_url(const std::string& locator) {
    return locator.rfind("http://", 0) == 0 || locator.rfind("https://", 0) == 0;
}

bool has_pdf_suffix(const std::string& path) {
    if (path.size() < 4) return false;
    std::string tail = to_lower_ascii(path.substr(path.size() - 4));
    return tail == ".pdf";
}

std::optional<std::string> run_converter(const std::string& command_template,
                                         const std::string& path, Logger& logger) {
    std::string command = PromptLibrary::render(command_template, {{"input", path}});
    if (command == command_template) command = command_template + " '" + path + "'";
    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) {
        logger.warn("pdf converter could not start: " + command);
        return std::nullopt;
    }
    std::string out;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
    int status = ::pclose(pipe);
    if (status != 0) {
        logger.warn("pdf converter exited with status " + std::to_string(status) + ": " +
                    command);
        return std::nullopt;
    }
    return out;
}

}  // namespace

std::optional<std::string> DefaultTextFetcher::fetch(const std::string& locator) {
    if (is_http_url(locator)) {
        if (!options_.allow_http) {
            logger_.warn("http fetch disabled, skipping " + locator);
            return std::nullopt;
        }
        size_t scheme_end = locator.find("://") + 3;
        size_t path_start = locator.find('/', scheme_end);
        std::string origin =
            path_start == std::string::npos ? locator : locator.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : locator.substr(path_start);
        httplib::Client client(origin);
        client.set_connection_timeout(options_.timeout_seconds, 0);
        client.set_read_timeout(options_.timeout_seconds, 0);
        client.set_follow_location(true);
        auto result = client.Get(path);
        if (!result || result->status != 200) {
            logger_.warn("fetch failed for " + locator);
            return std::nullopt;
        }
        return result->body;
    }

    fs::path p(locator);
    if (p.is_relative() && !options_.base_dir.empty()) {
        p = fs::path(options_.base_dir) / p;
    }
    if (!file_exists(p.string())) {
        logger_.warn("local document missing: " + p.string());
        return std::nullopt;
    }
    if (has_pdf_suffix(p.string())) {
        if (options_.pdf_converter.empty()) {
            logger_.warn("no pdf converter configured, skipping " + p.string());
            return std::nullopt;
        }
        return run_converter(options_.pdf_converter, p.string(), logger_);
    }
    return read_text_file(p.string());
}

// ---------------------------------------------------------------------------
// CorpusStore
// ---------------------------------------------------------------------------

CorpusStore::CorpusStore(std::string cache_dir, std::shared_ptr<TextFetcher> fetcher,
                         LlmGateway& llm, const PromptLibrary& prompts, CorpusOptions options,
                         Logger logger)
    : cache_dir_(std::move(cache_dir)), fetcher_(std::move(fetcher)), llm_(llm),
      prompts_(prompts), options_(options), logger_(std::move(logger)) {
    if (!cache_dir_.empty()) ensure_directory(cache_dir_);
}

std::vector<std::string> CorpusStore::split_pages(const std::string& text,
                                                  const CorpusOptions& options) {
    std::vector<std::string> pages;
    if (text.find('\f') != std::string::npos) {
        std::string current;
        for (char c : text) {
            if (c == '\f') {
                if (!trim(current).empty()) pages.push_back(current);
                current.clear();
            } else {
                current += c;
            }
        }
        if (!trim(current).empty()) pages.push_back(current);
        return pages;
    }

    // No form feeds: fixed word windows with overlap.
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    if (words.empty()) return pages;

    int window = std::max(1, options.window_words);
    int stride = std::max(1, window - std::max(0, options.window_overlap));
    for (size_t start = 0; start < words.size();
         start += static_cast<size_t>(stride)) {
        size_t end = std::min(words.size(), start + static_cast<size_t>(window));
        std::string page;
        for (size_t i = start; i < end; ++i) {
            if (i > start) page += ' ';
            page += words[i];
        }
        pages.push_back(std::move(page));
        if (end == words.size()) break;
    }
    return pages;
}

DocumentPages CorpusStore::load_cached(const LiteratureRecord& record) {
    DocumentPages doc;
    fs::path txt = fs::path(cache_dir_) / (record.record_id + ".txt");
    fs::path manifest_path = fs::path(cache_dir_) / "manifest.json";
    if (!file_exists(txt.string()) || !file_exists(manifest_path.string())) return doc;

    json manifest = json::parse(read_text_file(manifest_path.string()), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object() ||
        !manifest.contains(record.record_id)) {
        return doc;
    }
    const json& meta = manifest[record.record_id];
    if (!meta.is_object() || !meta.contains("fetched_from") ||
        !meta["fetched_from"].is_string()) {
        return doc;
    }
    std::string text = read_text_file(txt.string());
    std::string current;
    for (char c : text) {
        if (c == '\f') {
            doc.pages.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    doc.pages.push_back(current);
    bool all_blank = true;
    for (const auto& p : doc.pages) {
        if (!trim(p).empty()) all_blank = false;
    }
    if (all_blank) return DocumentPages{};  // treat a tampered cache entry as a miss
    doc.record_id = record.record_id;
    doc.fetched_from = fetched_from_string(meta["fetched_from"].get<std::string>());
    return doc;
}

void CorpusStore::store_cache(const DocumentPages& doc) {
    if (cache_dir_.empty()) return;
    fs::path txt = fs::path(cache_dir_) / (doc.record_id + ".txt");
    std::string joined;
    for (size_t i = 0; i < doc.pages.size(); ++i) {
        if (i) joined += '\f';
        joined += doc.pages[i];
    }
    write_text_file_atomic(txt.string(), joined);

    fs::path manifest_path = fs::path(cache_dir_) / "manifest.json";
    json manifest = json::object();
    if (file_exists(manifest_path.string())) {
        manifest = json::parse(read_text_file(manifest_path.string()), nullptr, false);
        if (manifest.is_discarded() || !manifest.is_object()) manifest = json::object();
    }
    manifest[doc.record_id] = json{{"fetched_from", to_string(doc.fetched_from)},
                                   {"pages", doc.pages.size()}};
    write_text_file_atomic(manifest_path.string(), manifest.dump(2) + "\n");
}

DocumentPages CorpusStore::fetch_document(const LiteratureRecord& record) {
    // Fast path plus per-record in-flight lock so concurrent fetches of the
    // same record coalesce.
    std::shared_ptr<std::mutex> record_lock;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = memory_cache_.find(record.record_id);
        if (it != memory_cache_.end()) return it->second;
        auto& slot = inflight_[record.record_id];
        if (!slot) slot = std::make_shared<std::mutex>();
        record_lock = slot;
    }
    std::lock_guard<std::mutex> fetch_guard(*record_lock);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = memory_cache_.find(record.record_id);
        if (it != memory_cache_.end()) return it->second;
    }

    DocumentPages doc;
    if (!cache_dir_.empty()) doc = load_cached(record);

    if (doc.pages.empty()) {
        std::optional<std::string> text;
        if (record.fulltext_locator && !record.fulltext_locator->empty()) {
            {
                std::lock_guard<std::mutex> lock(mutex_);
                ++backend_fetches_;
            }
            text = fetcher_ ? fetcher_->fetch(*record.fulltext_locator) : std::nullopt;
        }
        doc.record_id = record.record_id;
        if (text && !trim(*text).empty()) {
            doc.pages = split_pages(*text, options_);
            doc.fetched_from = FetchedFrom::fulltext;
        }
        if (doc.pages.empty()) {
            if (trim(record.abstract).empty()) {
                throw CorpusError("record " + record.record_id +
                                  ": fetch failed and no abstract to fall back to");
            }
            doc.pages = {record.abstract};
            doc.fetched_from = FetchedFrom::abstract_fallback;
        }
        store_cache(doc);
    }

    std::lock_guard<std::mutex> lock(mutex_);
    memory_cache_[record.record_id] = doc;
    inflight_.erase(record.record_id);
    return doc;
}

std::vector<int> CorpusStore::preview_pages(const DocumentPages& doc, const std::string& focus,
                                            int limit) {
    if (limit < 1) throw CorpusError("preview limit must be >= 1");
    if (doc.pages.empty()) throw CorpusError("document " + doc.record_id + " has no pages");
    if (doc.pages.size() == 1) return {0};

    std::string digest;
    for (size_t i = 0; i < doc.pages.size(); ++i) {
        std::string head = doc.pages[i].substr(0, 400);
        digest += "page " + std::to_string(i) + ": " + head + "\n";
    }

    ChatRequest request;
    request.agent_role = AgentRole::locator;
    request.request_tag = "page-preview";
    request.system_prompt = prompts_.system_prompt(AgentRole::locator);
    request.user_prompt = PromptLibrary::render(
        prompts_.get(AgentRole::locator, "page-preview"),
        {{"page_count", std::to_string(doc.pages.size())},
         {"limit", std::to_string(limit)},
         {"focus", focus},
         {"page_digest", digest}});

    ShapeSpec shape;
    shape.summary = "{\"pages\": [integer, ...]}";
    shape.validate = [](const json& j) -> std::optional<std::string> {
        if (!j.is_object() || !j.contains("pages") || !j["pages"].is_array())
            return "missing array field 'pages'";
        for (const auto& e : j["pages"]) {
            if (!e.is_number_integer()) return "'pages' must contain integers";
        }
        return std::nullopt;
    };

    StructuredResult result = complete_structured(llm_, request, shape);
    std::set<int> chosen;
    for (const auto& e : result.value["pages"]) {
        int idx = e.get<int>();
        if (idx < 0 || idx >= static_cast<int>(doc.pages.size())) {
            logger_.warn("preview for " + doc.record_id + " returned out-of-range page " +
                         std::to_string(idx) + ", dropped");
            continue;
        }
        chosen.insert(idx);
    }
    std::vector<int> out(chosen.begin(), chosen.end());
    if (static_cast<int>(out.size()) > limit) out.resize(static_cast<std::size_t>(limit));
    return out;
}

std::int64_t CorpusStore::backend_fetch_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return backend_fetches_;
}

}  // namespace litrev
