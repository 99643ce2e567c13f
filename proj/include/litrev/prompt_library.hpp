#pragma once

#include <map>
#include <string>
#include <vector>

#include "litrev/domain.hpp"

namespace litrev {

/// Prompt templates keyed by (agent_role, request_tag), plus per-role review
/// checklists. Compiled-in defaults come from assets/; when a directory is
/// configured, files in it override the defaults without a rebuild
/// (prompts/<role>/<tag>.txt, checklists/<role>.txt).
class PromptLibrary {
public:
    PromptLibrary();
    explicit PromptLibrary(std::string override_dir);

    /// Template text for (role, tag). Throws Error when no template exists.
    std::string get(AgentRole role, const std::string& tag) const;

    /// System prompt for a role (the "_system" template).
    std::string system_prompt(AgentRole role) const;

    /// Default checklist lines for an executor role.
    std::vector<std::string> checklist(AgentRole role) const;

    /// Replaces every "{key}" occurrence for keys present in vars. Braces not
    /// matching a provided key pass through untouched, so JSON examples in
    /// templates are safe.
    static std::string render(const std::string& template_text,
                              const std::map<std::string, std::string>& vars);

private:
    std::string override_dir_;
};

}  // namespace litrev
