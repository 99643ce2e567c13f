#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "litrev/corpus.hpp"
#include "litrev/domain.hpp"
#include "litrev/eval_harness.hpp"
#include "litrev/experience.hpp"
#include "litrev/exploitation.hpp"
#include "litrev/exploration.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"
#include "litrev/search_gateway.hpp"

namespace litrev {

class OrchestratorError : public Error {
public:
    using Error::Error;
};

/// Thrown by the test stop hooks after a checkpoint commit; the run directory
/// is left consistent and resumable.
class StopRequested : public Error {
public:
    using Error::Error;
};

struct BackendSettings {
    std::string kind = "mock";  // "mock" or "live"
    std::string script_path;    // mock chat script
    std::string corpus_path;    // fixture corpus (mock) or empty
    std::string prompt_dir;     // empty uses compiled-in assets
    std::string chat_endpoint;
    std::string chat_model;
    std::string search_endpoint;
    std::string api_key_env = "LITREV_API_KEY";
    std::string search_key_env = "LITREV_SEARCH_API_KEY";
    std::string pdf_converter;
    std::string experience_store;  // empty defaults to <run_dir>/experience.json
    int permits = 4;
};

json to_json(const BackendSettings& v);
void from_json_strict(const json& j, BackendSettings& v);

struct RunManifest {
    std::string run_id;
    UserInstruction instruction;
    RunConfig config;
    Phase phase = Phase::exploring;
    std::optional<Phase> failed_during;
    std::map<std::string, double> timing;  // phase name -> seconds
    TokenUsage token_totals;
    BackendSettings backend;
    std::map<std::string, std::int64_t> script_cursors;
    std::vector<std::string> completed_jobs;
};

json to_json(const RunManifest& v);
void from_json_strict(const json& j, RunManifest& v);

/// Replaces resolvable [key] citations by [n] bibliography numbers.
std::string transform_citations(const std::string& body, const std::map<std::string, int>& map);

using PolishFn = std::function<std::vector<std::string>(const std::vector<std::string>&)>;

/// Orders the finalized section drafts by tree pre-order, renumbers per-
/// section citation keys into one deduplicated bibliography and applies the
/// optional coherence polish pass. Unresolvable keys in a draft are a hard
/// error naming the section and key.
Manuscript assemble(const TreeCheckpoint& checkpoint, const std::vector<SectionJob>& jobs,
                    const PolishFn& polish = nullptr, Logger logger = {});

/// Markdown rendering: #-level headings per tree depth, numeric in-text
/// citations, trailing numbered reference list.
std::string render_markdown(const Manuscript& manuscript, const OutlineTree& tree);

class Orchestrator {
public:
    struct StopHooks {
        bool after_exploring = false;
        int after_n_jobs = -1;  // stop once this many jobs have been committed
        bool after_exploiting = false;
    };

    Orchestrator(std::string checkpoint_root, std::string run_id, BackendSettings backend,
                 RunConfig config, Logger logger = {});

    /// Fresh run: explore, exploit per section, assemble. Every phase is
    /// checkpointed; on failure the manifest is marked failed and the error
    /// propagates.
    Manuscript run(const UserInstruction& instruction);

    /// Continues at the first incomplete unit of work recorded in the
    /// manifest; a finished run is a no-op returning the stored manuscript.
    Manuscript resume();

    const RunManifest& manifest() const { return manifest_; }
    std::string run_dir() const;

    static RunManifest load_manifest(const std::string& checkpoint_root,
                                     const std::string& run_id);

    StopHooks stop_hooks;

    LlmGateway& gateway() { return *gateway_; }
    ExperienceEngine& experience() { return *experience_; }
    CorpusStore& corpus() { return *corpus_; }
    const PromptLibrary& prompts() const { return *prompts_; }

private:
    void build_components();
    void commit_manifest();
    void snapshot_cursors();
    Manuscript execute();
    Manuscript load_final_manuscript() const;
    PolishFn make_polish_fn();

    std::string checkpoint_root_;
    RunManifest manifest_;
    Logger logger_;
    TokenUsage usage_base_;

    std::unique_ptr<PromptLibrary> prompts_;
    std::shared_ptr<ChatBackend> chat_backend_;
    std::shared_ptr<ScriptedChatBackend> scripted_backend_;  // set when kind == mock
    std::unique_ptr<LlmGateway> gateway_;
    std::shared_ptr<SearchBackend> search_backend_;
    std::unique_ptr<ExperienceEngine> experience_;
    std::unique_ptr<SearchGateway> search_;
    std::unique_ptr<CorpusStore> corpus_;
};

}  // namespace litrev
