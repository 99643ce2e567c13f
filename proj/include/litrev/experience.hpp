#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "litrev/domain.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"

namespace litrev {

/// In-memory store of manager reviews with a per-role index. Keyed by
/// review_id so iteration order is independent of insertion order.
struct ExperienceStore {
    std::map<std::string, ExperienceRecord> records;
    std::map<AgentRole, std::vector<std::string>> by_role;

    void insert(ExperienceRecord record);
    ExperienceRecord& at(const std::string& review_id);

    static ExperienceStore from_json_array(const json& j);
    json to_json_array() const;
};

/// Picks the exemplar review for a role: among the role's records, restrict
/// to those with minimal revision_count, then take maximal usage_count; ties
/// break on review_id ascending. Empty store yields nullopt.
std::optional<ExperienceRecord> select_experience(const ExperienceStore& store, AgentRole role);

struct ReviewOutcome {
    bool accepted = false;
    std::optional<std::string> comments;     // final iteration's comments
    int iterations_used = 0;                 // number of revisions produced
    std::optional<std::string> review_used;  // exemplar id, when one existed
};

/// The produce callable: given the latest reviewer comments (nullopt on the
/// first call), return the (possibly revised) output text.
using ProduceFn = std::function<std::string(const std::optional<std::string>&)>;

/// Review/revise loop around executor outputs, with persistent experience.
/// The store file is rewritten atomically after every recorded outcome, so a
/// crash never leaves it half-written.
class ExperienceEngine {
public:
    ExperienceEngine(LlmGateway& gateway, const PromptLibrary& prompts, std::string store_path,
                     int max_iters, Logger logger = {});

    /// Loads an existing store file; a missing file is a legal cold start.
    void load();
    void save() const;

    std::optional<ExperienceRecord> select(AgentRole role) const;

    /// One manager review call. Returns the comments, or nullopt when the
    /// manager answered with the acceptance sentinel.
    std::optional<std::string> review(const std::string& output, AgentRole role,
                                      const std::optional<ExperienceRecord>& exemplar,
                                      const std::vector<std::string>& checklist);

    /// Produce -> review -> revise until acceptance or the iteration cap.
    /// Afterwards records the outcome into the store and persists it.
    std::pair<std::string, ReviewOutcome> run_loop(const ProduceFn& produce, AgentRole role);

    /// Store update after a finished loop: the run's first comment becomes a
    /// new record with revision_count = max(iterations_used - 1, 0); the
    /// exemplar, when present, gets usage_count + 1 and its revision_count
    /// raised to iterations_used if that is higher.
    void record_outcome(AgentRole role, const std::vector<std::string>& comments_history,
                        int iterations_used, const std::optional<std::string>& exemplar_id);

    /// Default checklist for the role plus the first sentence of each stored
    /// review for that role.
    std::vector<std::string> checklist_for(AgentRole role) const;

    const ExperienceStore& store() const { return store_; }
    ExperienceStore& mutable_store() { return store_; }

    static constexpr const char* kAcceptSentinel = "ACCEPT";

private:
    std::string next_review_id();

    LlmGateway& gateway_;
    const PromptLibrary& prompts_;
    std::string store_path_;
    int max_iters_;
    Logger logger_;
    mutable std::mutex mutex_;
    ExperienceStore store_;
    int id_counter_ = 0;
};

}  // namespace litrev
