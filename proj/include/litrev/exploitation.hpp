#pragma once

#include <map>
#include <string>
#include <vector>

#include "litrev/corpus.hpp"
#include "litrev/domain.hpp"
#include "litrev/experience.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"

namespace litrev {

class ExploitationError : public Error {
public:
    using Error::Error;
};

/// One drafting unit: a parent-of-leaf node and the leaves it covers.
/// Leaves whose parent is the root form their own single-node group.
struct SectionGroup {
    std::string group_node_id;
    std::vector<std::string> leaf_ids;
};

/// Groups in depth-first pre-order of their group node.
std::vector<SectionGroup> section_groups(const OutlineTree& tree);

struct SectionJob {
    std::string parent_node_id;
    std::vector<std::string> literature_ids;  // union over the group subtree, stable order
    std::map<int, std::vector<FactSnippet>> snippets_by_iteration;
    DraftSection draft;
};

json to_json(const SectionJob& v);
void from_json_strict(const json& j, SectionJob& v);

/// Alternating locate/draft refinement per section, stopping when consecutive
/// drafts are similar enough or the iteration cap is hit.
class Exploitation {
public:
    static constexpr int kMaxSnippetsPerDoc = 5;

    Exploitation(CorpusStore& corpus, LlmGateway& llm, const PromptLibrary& prompts,
                 ExperienceEngine* experience, RunConfig config,
                 const std::map<std::string, LiteratureRecord>& records, Logger logger = {});

    SectionJob make_job(const OutlineTree& tree, const SectionGroup& group) const;

    /// Iteration-0 extraction, focused on the outline. Per-document failures
    /// degrade to skipping the document; zero snippets overall is an error.
    std::vector<FactSnippet> locate_initial(SectionJob& job, const OutlineTree& tree);

    /// First draft from the iteration-0 snippets. Citation keys must resolve
    /// within the job's literature (one repair re-prompt, then error).
    void draft_initial(SectionJob& job, const OutlineTree& tree);

    /// Re-examines the literature focused on draft revision t. New snippets
    /// are stored under iteration t+1 (the revision they will produce);
    /// duplicates of earlier snippets are dropped and an empty result is
    /// legal.
    std::vector<FactSnippet> locate_refine(SectionJob& job, const OutlineTree& tree, int t);

    /// Produces revision t+1 from revision t plus the iteration-t+1 snippets.
    void draft_refine(SectionJob& job, const OutlineTree& tree, int t);

    /// locate_initial + draft_initial, then refine cycles until the
    /// similarity threshold or t_max. On an inner error after revision 0 the
    /// last good revision is finalized with a warning.
    SectionJob run_cycle(SectionJob job, const OutlineTree& tree);

private:
    std::string outline_digest_for(const SectionJob& job, const OutlineTree& tree) const;
    std::vector<FactSnippet> locate_pass(SectionJob& job, const OutlineTree& tree,
                                         const std::string& focus, int iteration);
    std::string drafting_call(SectionJob& job, const OutlineTree& tree, const std::string& tag,
                              const std::vector<FactSnippet>& snippets,
                              const std::string& previous_draft);
    std::vector<std::string> validate_citations(const std::string& body,
                                                const SectionJob& job) const;

    CorpusStore& corpus_;
    LlmGateway& llm_;
    const PromptLibrary& prompts_;
    ExperienceEngine* experience_;
    RunConfig config_;
    const std::map<std::string, LiteratureRecord>& records_;
    Logger logger_;
};

}  // namespace litrev
