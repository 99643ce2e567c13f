#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "litrev/domain.hpp"
#include "litrev/experience.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"
#include "litrev/search_gateway.hpp"

namespace litrev {

class ExplorationError : public Error {
public:
    using Error::Error;
};

struct ExplorationState {
    OutlineTree tree;
    std::map<std::string, LiteratureRecord> records;
    std::deque<std::string> frontier;  // node ids awaiting the decomposition decision
    int depth_reached = 0;
};

/// Equal split of a parent budget over k children, remainder to the first.
std::vector<int> split_budget(int total, int k);

/// Builds the outline tree: breadth-first expansion from the root until every
/// leaf either fails the decomposition test or sits at the depth cap.
class Exploration {
public:
    static constexpr int kMinChildren = 2;
    static constexpr int kMaxChildren = 8;

    Exploration(SearchGateway& search, LlmGateway& llm, const PromptLibrary& prompts,
                ExperienceEngine* experience, RunConfig config, Logger logger = {});

    /// Complexity of an outline direction: the words budgeted for it.
    static int complexity(const OutlineNode& node);

    /// True iff complexity exceeds theta AND the node sits above the depth
    /// cap. The theta comparison is strictly greater-than.
    static bool should_decompose(const OutlineNode& node, const RunConfig& config);

    /// Retrieves literature for the node, attaches the top-Q records, asks
    /// the outlining agent for sub-directions and returns them as child
    /// drafts (ids unassigned, budgets split from the parent). Returns an
    /// empty vector when the node must be forced to a leaf (no literature or
    /// fewer than two children after repair). Fetched records are registered
    /// into `registry` when one is given.
    std::vector<OutlineNode> expand_node(OutlineNode& node,
                                         std::map<std::string, LiteratureRecord>* registry = nullptr);

    /// Full tree construction. On an unrecovered gateway error the partial
    /// state is handed to `on_partial` (when set) before the error propagates.
    TreeCheckpoint build_tree(const UserInstruction& instruction);

    std::function<void(const ExplorationState&)> on_partial;

private:
    struct ChildDraft {
        std::string heading;
        std::string description;
    };

    std::vector<LiteratureRecord> retrieve_for(const std::string& context);
    std::vector<ChildDraft> outline_children(const std::string& heading,
                                             const std::string& description, int word_budget,
                                             const std::vector<LiteratureRecord>& literature);

    SearchGateway& search_;
    LlmGateway& llm_;
    const PromptLibrary& prompts_;
    ExperienceEngine* experience_;
    RunConfig config_;
    Logger logger_;
    int node_counter_ = 0;
};

}  // namespace litrev
