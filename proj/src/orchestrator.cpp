#include "litrev/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

namespace fs = std::filesystem;

namespace litrev {

// ---------------------------------------------------------------------------
// BackendSettings / RunManifest JSON
// ---------------------------------------------------------------------------

json to_json(const BackendSettings& v) {
    return json{{"kind", v.kind},
                {"script_path", v.script_path},
                {"corpus_path", v.corpus_path},
                {"prompt_dir", v.prompt_dir},
                {"chat_endpoint", v.chat_endpoint},
                {"chat_model", v.chat_model},
                {"search_endpoint", v.search_endpoint},
                {"api_key_env", v.api_key_env},
                {"search_key_env", v.search_key_env},
                {"pdf_converter", v.pdf_converter},
                {"experience_store", v.experience_store},
                {"permits", v.permits}};
}

void from_json_strict(const json& j, BackendSettings& v) {
    if (!j.is_object()) throw SchemaError("BackendSettings: expected a JSON object");
    static const std::set<std::string> allowed{
        "kind",           "script_path",    "corpus_path",   "prompt_dir",
        "chat_endpoint",  "chat_model",     "search_endpoint", "api_key_env",
        "search_key_env", "pdf_converter",  "experience_store", "permits"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SchemaError("BackendSettings: unknown key '" + it.key() + "'");
    }
    auto get_str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string())
            throw SchemaError(std::string("BackendSettings: missing string '") + key + "'");
        return j[key].get<std::string>();
    };
    v.kind = get_str("kind");
    v.script_path = get_str("script_path");
    v.corpus_path = get_str("corpus_path");
    v.prompt_dir = get_str("prompt_dir");
    v.chat_endpoint = get_str("chat_endpoint");
    v.chat_model = get_str("chat_model");
    v.search_endpoint = get_str("search_endpoint");
    v.api_key_env = get_str("api_key_env");
    v.search_key_env = get_str("search_key_env");
    v.pdf_converter = get_str("pdf_converter");
    v.experience_store = get_str("experience_store");
    if (!j.contains("permits") || !j["permits"].is_number_integer())
        throw SchemaError("BackendSettings: missing integer 'permits'");
    v.permits = j["permits"].get<int>();
    if (v.kind != "mock" && v.kind != "live")
        throw SchemaError("BackendSettings: kind must be 'mock' or 'live'");
}

json to_json(const RunManifest& v) {
    json timing = json::object();
    for (const auto& [phase, seconds] : v.timing) timing[phase] = seconds;
    json cursors = json::object();
    for (const auto& [key, n] : v.script_cursors) cursors[key] = n;
    json j{{"run_id", v.run_id},
           {"instruction", to_json(v.instruction)},
           {"config", to_json(v.config)},
           {"phase", to_string(v.phase)},
           {"timing", timing},
           {"token_totals", json{{"prompt", v.token_totals.prompt},
                                 {"completion", v.token_totals.completion}}},
           {"backend", to_json(v.backend)},
           {"script_cursors", cursors},
           {"completed_jobs", v.completed_jobs}};
    j["failed_during"] = v.failed_during ? json(to_string(*v.failed_during)) : json(nullptr);
    return j;
}

void from_json_strict(const json& j, RunManifest& v) {
    const char* W = "RunManifest";
    if (!j.is_object()) throw SchemaError("RunManifest: expected a JSON object");
    static const std::set<std::string> allowed{
        "run_id",       "instruction",    "config",        "phase",
        "failed_during", "timing",        "token_totals",  "backend",
        "script_cursors", "completed_jobs"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SchemaError("RunManifest: unknown key '" + it.key() + "'");
    }
    if (!j.contains("run_id") || !j["run_id"].is_string())
        throw SchemaError(std::string(W) + ": missing string 'run_id'");
    v.run_id = j["run_id"].get<std::string>();
    from_json_strict(j.at("instruction"), v.instruction);
    from_json_strict(j.at("config"), v.config);
    if (!j.contains("phase") || !j["phase"].is_string())
        throw SchemaError(std::string(W) + ": missing string 'phase'");
    v.phase = phase_from_string(j["phase"].get<std::string>());
    if (!j.contains("failed_during")) throw SchemaError(std::string(W) + ": missing 'failed_during'");
    if (j["failed_during"].is_null()) {
        v.failed_during.reset();
    } else if (j["failed_during"].is_string()) {
        v.failed_during = phase_from_string(j["failed_during"].get<std::string>());
    } else {
        throw SchemaError(std::string(W) + ": 'failed_during' must be a string or null");
    }
    if (!j.contains("timing") || !j["timing"].is_object())
        throw SchemaError(std::string(W) + ": missing object 'timing'");
    v.timing.clear();
    for (auto it = j["timing"].begin(); it != j["timing"].end(); ++it) {
        if (!it.value().is_number())
            throw SchemaError(std::string(W) + ": timing values must be numbers");
        v.timing[it.key()] = it.value().get<double>();
    }
    if (!j.contains("token_totals") || !j["token_totals"].is_object())
        throw SchemaError(std::string(W) + ": missing object 'token_totals'");
    v.token_totals.prompt = j["token_totals"].value("prompt", 0);
    v.token_totals.completion = j["token_totals"].value("completion", 0);
    from_json_strict(j.at("backend"), v.backend);
    if (!j.contains("script_cursors") || !j["script_cursors"].is_object())
        throw SchemaError(std::string(W) + ": missing object 'script_cursors'");
    v.script_cursors.clear();
    for (auto it = j["script_cursors"].begin(); it != j["script_cursors"].end(); ++it) {
        if (!it.value().is_number_integer())
            throw SchemaError(std::string(W) + ": script cursors must be integers");
        v.script_cursors[it.key()] = it.value().get<std::int64_t>();
    }
    if (!j.contains("completed_jobs") || !j["completed_jobs"].is_array())
        throw SchemaError(std::string(W) + ": missing array 'completed_jobs'");
    v.completed_jobs.clear();
    for (const auto& e : j["completed_jobs"]) {
        if (!e.is_string())
            throw SchemaError(std::string(W) + ": completed_jobs must contain strings");
        v.completed_jobs.push_back(e.get<std::string>());
    }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

std::string transform_citations(const std::string& body, const std::map<std::string, int>& map) {
    std::string out;
    out.reserve(body.size());
    size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '[') {
            size_t close = body.find(']', i + 1);
            if (close != std::string::npos) {
                std::string key = body.substr(i + 1, close - i - 1);
                auto it = map.find(key);
                if (it != map.end()) {
                    out += "[" + std::to_string(it->second + 1) + "]";
                    i = close + 1;
                    continue;
                }
            }
        }
        out += body[i];
        ++i;
    }
    return out;
}

Manuscript assemble(const TreeCheckpoint& checkpoint, const std::vector<SectionJob>& jobs,
                    const PolishFn& polish, Logger logger) {
    // Jobs keyed by group node; order by tree pre-order.
    std::map<std::string, const SectionJob*> by_node;
    for (const auto& job : jobs) {
        if (!job.draft.finalized()) {
            throw OrchestratorError("assemble requires finalized jobs; section " +
                                    job.parent_node_id + " is not final");
        }
        by_node[job.parent_node_id] = &job;
    }
    std::vector<const SectionJob*> ordered;
    for (const auto& id : preorder_ids(checkpoint.tree)) {
        auto it = by_node.find(id);
        if (it != by_node.end()) ordered.push_back(it->second);
    }
    if (ordered.size() != jobs.size()) {
        throw OrchestratorError("assemble: some section jobs reference nodes outside the tree");
    }

    std::vector<std::string> bodies;
    bodies.reserve(ordered.size());
    for (const auto* job : ordered) bodies.push_back(job->draft.final_revision().body);

    if (polish && !bodies.empty()) {
        std::vector<std::string> polished = polish(bodies);
        if (polished.size() != bodies.size()) {
            logger.warn("polish pass changed the section count, keeping unpolished text");
        } else {
            for (size_t i = 0; i < polished.size(); ++i) {
                bool ok = true;
                for (const auto& key : citation_keys(polished[i])) {
                    if (!checkpoint.records.count(key)) {
                        ok = false;
                        logger.warn("polish introduced unknown citation key '" + key +
                                    "' in section " + ordered[i]->parent_node_id +
                                    ", keeping original body");
                        break;
                    }
                }
                if (ok) bodies[i] = polished[i];
            }
        }
    }

    // Global bibliography in order of first citation appearance.
    Manuscript manuscript;
    manuscript.title = checkpoint.tree.root_instruction.topic_text;
    for (size_t i = 0; i < ordered.size(); ++i) {
        for (const auto& key : citation_keys(bodies[i])) {
            if (manuscript.citation_map.count(key)) continue;
            auto rec_it = checkpoint.records.find(key);
            if (rec_it == checkpoint.records.end()) {
                throw OrchestratorError("unresolved citation key '" + key + "' in section " +
                                        ordered[i]->parent_node_id);
            }
            manuscript.citation_map[key] = static_cast<int>(manuscript.bibliography.size());
            manuscript.bibliography.push_back(rec_it->second);
        }
    }

    for (size_t i = 0; i < ordered.size(); ++i) {
        DraftSection section = ordered[i]->draft;
        DraftRevision& final_rev = section.revisions.at(
            static_cast<size_t>(*section.final_iteration));
        final_rev.body = bodies[i];
        final_rev.cited_record_ids.clear();
        for (const auto& key : citation_keys(bodies[i]))
            final_rev.cited_record_ids.push_back(key);
        manuscript.sections.push_back(std::move(section));
    }
    return manuscript;
}

// ---------------------------------------------------------------------------
// Markdown rendering
// ---------------------------------------------------------------------------

namespace {

void render_node(const OutlineTree& tree, const std::string& node_id,
                 const std::map<std::string, const DraftSection*>& sections,
                 const std::map<std::string, int>& citations, const std::string& number,
                 std::string& out) {
    const OutlineNode& node = tree.node(node_id);
    std::string hashes(static_cast<size_t>(node.depth) + 1, '#');
    out += hashes + " " + number + " " + node.heading + "\n\n";

    auto sec_it = sections.find(node_id);
    if (sec_it != sections.end()) {
        out += transform_citations(sec_it->second->final_revision().body, citations) + "\n\n";
    }

    int child_number = 0;
    for (const auto& cid : node.children) {
        const OutlineNode& child = tree.node(cid);
        bool child_has_heading = !child.is_leaf() || sections.count(cid);
        if (!child_has_heading) continue;  // leaf covered by this section's body
        ++child_number;
        render_node(tree, cid, sections, citations, number + "." + std::to_string(child_number),
                    out);
    }
}

}  // namespace

std::string render_markdown(const Manuscript& manuscript, const OutlineTree& tree) {
    std::map<std::string, const DraftSection*> sections;
    for (const auto& section : manuscript.sections) {
        sections[section.section_node_id] = &section;
    }

    std::string out = "# " + manuscript.title + "\n\n";
    int number = 0;
    for (const auto& id : tree.root_children) {
        const OutlineNode& node = tree.node(id);
        bool has_heading = !node.is_leaf() || sections.count(id);
        if (!has_heading) continue;
        ++number;
        render_node(tree, id, sections, manuscript.citation_map, std::to_string(number), out);
    }

    out += "## References\n\n";
    for (size_t i = 0; i < manuscript.bibliography.size(); ++i) {
        const LiteratureRecord& record = manuscript.bibliography[i];
        out += std::to_string(i + 1) + ". " + join(record.authors, ", ") + ". " + record.title +
               ". " + std::to_string(record.year) + ".\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

namespace {

std::string env_or_empty(const std::string& name) {
    const char* value = std::getenv(name.c_str());
    return value ? value : "";
}

class PhaseTimer {
public:
    PhaseTimer(std::map<std::string, double>& timing, const std::string& phase)
        : timing_(timing), phase_(phase), start_(std::chrono::steady_clock::now()) {}
    ~PhaseTimer() {
        auto end = std::chrono::steady_clock::now();
        timing_[phase_] += std::chrono::duration<double>(end - start_).count();
    }

private:
    std::map<std::string, double>& timing_;
    std::string phase_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

Orchestrator::Orchestrator(std::string checkpoint_root, std::string run_id,
                           BackendSettings backend, RunConfig config, Logger logger)
    : checkpoint_root_(std::move(checkpoint_root)), logger_(std::move(logger)) {
    config.validate();
    manifest_.run_id = std::move(run_id);
    manifest_.config = std::move(config);
    manifest_.backend = std::move(backend);
    if (manifest_.run_id.empty()) throw OrchestratorError("run id must be non-empty");
}

std::string Orchestrator::run_dir() const {
    return (fs::path(checkpoint_root_) / manifest_.run_id).string();
}

RunManifest Orchestrator::load_manifest(const std::string& checkpoint_root,
                                        const std::string& run_id) {
    fs::path path = fs::path(checkpoint_root) / run_id / "manifest.json";
    if (!file_exists(path.string())) {
        throw OrchestratorError("no manifest for run " + run_id + " under " + checkpoint_root);
    }
    json j = json::parse(read_text_file(path.string()), nullptr, false);
    if (j.is_discarded()) throw SchemaError("manifest for " + run_id + " is not valid JSON");
    RunManifest manifest;
    from_json_strict(j, manifest);
    return manifest;
}

void Orchestrator::build_components() {
    const BackendSettings& b = manifest_.backend;
    prompts_ = b.prompt_dir.empty() ? std::make_unique<PromptLibrary>()
                                    : std::make_unique<PromptLibrary>(b.prompt_dir);

    GatewayOptions gw_options;
    gw_options.deterministic = manifest_.config.deterministic_mode;
    gw_options.permits = b.permits;
    gw_options.seed = manifest_.config.seed;

    if (b.kind == "mock") {
        if (b.script_path.empty())
            throw OrchestratorError("mock backend requires a chat script path");
        scripted_backend_ = ScriptedChatBackend::from_file(b.script_path);
        chat_backend_ = scripted_backend_;
        gw_options.backoff_base_ms = 0;
        if (b.corpus_path.empty())
            throw OrchestratorError("mock backend requires a fixture corpus path");
        search_backend_ = FixtureSearchBackend::from_file(b.corpus_path);
    } else {
        HttpChatOptions chat;
        chat.endpoint = !b.chat_endpoint.empty() ? b.chat_endpoint
                                                 : env_or_empty("LITREV_CHAT_ENDPOINT");
        chat.model = !b.chat_model.empty() ? b.chat_model : env_or_empty("LITREV_MODEL");
        chat.api_key = env_or_empty(b.api_key_env);
        if (chat.api_key.empty()) chat.api_key = env_or_empty("OPENAI_API_KEY");
        chat_backend_ = std::make_shared<HttpChatBackend>(chat);

        HttpSearchOptions search;
        search.endpoint = !b.search_endpoint.empty() ? b.search_endpoint
                                                     : env_or_empty("LITREV_SEARCH_ENDPOINT");
        search.api_key = env_or_empty(b.search_key_env);
        search.seed = manifest_.config.seed;
        search_backend_ = std::make_shared<HttpSearchBackend>(search);
    }

    gateway_ = std::make_unique<LlmGateway>(chat_backend_, gw_options, logger_);

    std::string store_path = b.experience_store.empty()
                                 ? (fs::path(run_dir()) / "experience.json").string()
                                 : b.experience_store;
    experience_ = std::make_unique<ExperienceEngine>(*gateway_, *prompts_, store_path,
                                                     manifest_.config.experience_max_iters,
                                                     logger_);
    experience_->load();

    SearchGatewayOptions search_options;
    search_ = std::make_unique<SearchGateway>(*gateway_, search_backend_, *prompts_,
                                              experience_.get(), search_options, logger_);

    DefaultTextFetcher::Options fetch_options;
    if (!b.corpus_path.empty()) {
        fetch_options.base_dir = fs::path(b.corpus_path).parent_path().string();
    }
    fetch_options.pdf_converter = b.pdf_converter;
    fetch_options.allow_http = b.kind == "live";
    auto fetcher = std::make_shared<DefaultTextFetcher>(fetch_options, logger_);
    corpus_ = std::make_unique<CorpusStore>((fs::path(run_dir()) / "corpus").string(), fetcher,
                                            *gateway_, *prompts_, CorpusOptions{}, logger_);
}

void Orchestrator::snapshot_cursors() {
    if (scripted_backend_) manifest_.script_cursors = scripted_backend_->cursors();
}

void Orchestrator::commit_manifest() {
    TokenUsage session = gateway_ ? gateway_->total_usage() : TokenUsage{};
    manifest_.token_totals.prompt = usage_base_.prompt + session.prompt;
    manifest_.token_totals.completion = usage_base_.completion + session.completion;
    write_text_file_atomic((fs::path(run_dir()) / "manifest.json").string(),
                           to_json(manifest_).dump(2) + "\n");
}

Manuscript Orchestrator::run(const UserInstruction& instruction) {
    if (file_exists((fs::path(run_dir()) / "manifest.json").string())) {
        throw OrchestratorError("run " + manifest_.run_id +
                                " already exists; use resume or a fresh run id");
    }
    manifest_.instruction = instruction;
    manifest_.phase = Phase::exploring;
    ensure_directory(run_dir());
    build_components();
    usage_base_ = TokenUsage{};
    commit_manifest();
    return execute();
}

Manuscript Orchestrator::resume() {
    manifest_ = load_manifest(checkpoint_root_, manifest_.run_id);
    if (manifest_.phase == Phase::done) {
        return load_final_manuscript();  // resume after done is a no-op
    }
    if (manifest_.phase == Phase::failed) {
        Phase continue_from = manifest_.failed_during.value_or(Phase::exploring);
        logger_.info("resuming failed run " + manifest_.run_id + " from phase " +
                     to_string(continue_from));
        manifest_.phase = continue_from;
        manifest_.failed_during.reset();
    }
    build_components();
    usage_base_ = manifest_.token_totals;
    if (scripted_backend_ && !manifest_.script_cursors.empty()) {
        scripted_backend_->fast_forward(manifest_.script_cursors);
    }
    return execute();
}

Manuscript Orchestrator::load_final_manuscript() const {
    fs::path path = fs::path(run_dir()) / "manuscript.json";
    if (!file_exists(path.string())) {
        throw OrchestratorError("run " + manifest_.run_id +
                                " is marked done but has no manuscript.json");
    }
    return parse_json_text<Manuscript>(read_text_file(path.string()),
                                       "manuscript.json for " + manifest_.run_id);
}

PolishFn Orchestrator::make_polish_fn() {
    if (!manifest_.config.polish_enabled) return nullptr;
    return [this](const std::vector<std::string>& bodies) -> std::vector<std::string> {
        json arr = json::array();
        for (const auto& b : bodies) arr.push_back(b);
        std::string sections_json = arr.dump(2);
        size_t expected = bodies.size();

        ShapeSpec shape;
        shape.summary = "{\"sections\": [string, ...]} with the original section count";
        shape.validate = [expected](const json& j) -> std::optional<std::string> {
            if (!j.is_object() || !j.contains("sections") || !j["sections"].is_array())
                return "missing array field 'sections'";
            if (j["sections"].size() != expected)
                return "expected exactly " + std::to_string(expected) + " sections";
            for (const auto& s : j["sections"]) {
                if (!s.is_string()) return "'sections' must contain strings";
            }
            return std::nullopt;
        };

        auto produce = [&](const std::optional<std::string>& comments) -> std::string {
            std::string comments_block;
            if (comments) comments_block = "\nReviewer comments to address:\n" + *comments + "\n";
            ChatRequest request;
            request.agent_role = AgentRole::drafter;
            request.request_tag = "assemble-polish";
            request.system_prompt = prompts_->system_prompt(AgentRole::drafter);
            request.user_prompt = PromptLibrary::render(
                prompts_->get(AgentRole::drafter, "assemble-polish"),
                {{"sections_json", sections_json}, {"comments_block", comments_block}});
            return complete_structured(*gateway_, request, shape).raw_text;
        };

        std::string text = experience_->run_loop(produce, AgentRole::drafter).first;
        ChatResponse as_response;
        as_response.text = text;
        ParseOutcome parsed = parse_structured(as_response, shape);
        if (!parsed.value) {
            logger_.warn("polish pass unparseable after acceptance, keeping original text");
            return bodies;
        }
        std::vector<std::string> out;
        for (const auto& s : (*parsed.value)["sections"]) out.push_back(s.get<std::string>());
        return out;
    };
}

Manuscript Orchestrator::execute() {
    fs::path dir(run_dir());
    fs::path tree_path = dir / "tree.json";
    fs::path sections_dir = dir / "sections";

    try {
        TreeCheckpoint checkpoint;

        if (manifest_.phase == Phase::exploring) {
            PhaseTimer timer(manifest_.timing, "exploring");
            Exploration exploration(*search_, *gateway_, *prompts_, experience_.get(),
                                    manifest_.config, logger_);
            exploration.on_partial = [&](const ExplorationState& state) {
                TreeCheckpoint partial{state.tree, state.records};
                write_text_file_atomic(tree_path.string(), to_json(partial).dump(2) + "\n");
            };
            checkpoint = exploration.build_tree(manifest_.instruction);
            write_text_file_atomic(tree_path.string(), to_json(checkpoint).dump(2) + "\n");
            manifest_.phase = Phase::exploiting;
            snapshot_cursors();
            commit_manifest();
            if (stop_hooks.after_exploring) throw StopRequested("stop after exploring");
        } else {
            if (!file_exists(tree_path.string())) {
                throw SchemaError("run " + manifest_.run_id + " has no tree.json checkpoint");
            }
            checkpoint = parse_json_text<TreeCheckpoint>(read_text_file(tree_path.string()),
                                                         "tree.json for " + manifest_.run_id);
            auto violations = validate_tree(checkpoint.tree);
            if (!violations.empty()) {
                throw SchemaError("tree.json for " + manifest_.run_id +
                                  " fails validation: " + violations.front().code + " (" +
                                  violations.front().detail + ")");
            }
        }

        std::vector<SectionGroup> groups = section_groups(checkpoint.tree);
        if (groups.empty()) {
            throw OrchestratorError("the outline tree yields no drafting groups");
        }
        ensure_directory(sections_dir.string());

        std::vector<SectionJob> jobs;
        if (manifest_.phase == Phase::exploiting) {
            PhaseTimer timer(manifest_.timing, "exploiting");
            Exploitation exploitation(*corpus_, *gateway_, *prompts_, experience_.get(),
                                      manifest_.config, checkpoint.records, logger_);
            std::set<std::string> done(manifest_.completed_jobs.begin(),
                                       manifest_.completed_jobs.end());

            std::vector<std::optional<SectionJob>> results(groups.size());
            std::vector<size_t> pending;
            for (size_t i = 0; i < groups.size(); ++i) {
                fs::path job_path = sections_dir / (groups[i].group_node_id + ".json");
                if (done.count(groups[i].group_node_id)) {
                    results[i] = parse_json_text<SectionJob>(
                        read_text_file(job_path.string()),
                        "section checkpoint " + job_path.string());
                } else {
                    pending.push_back(i);
                }
            }

            // Scripted backends consume per-tag queues in call order, so mock
            // runs stay sequential; parallel fan-out is a live-backend option.
            bool sequential = manifest_.config.deterministic_mode ||
                              manifest_.backend.kind == "mock" ||
                              manifest_.backend.permits <= 1 || pending.size() <= 1;
            int committed = static_cast<int>(done.size());
            auto commit_job = [&](size_t index, SectionJob job) {
                fs::path job_path = sections_dir / (groups[index].group_node_id + ".json");
                write_text_file_atomic(job_path.string(), to_json(job).dump(2) + "\n");
                manifest_.completed_jobs.push_back(groups[index].group_node_id);
                snapshot_cursors();
                commit_manifest();
                results[index] = std::move(job);
                ++committed;
            };

            if (sequential) {
                for (size_t index : pending) {
                    SectionJob job = exploitation.run_cycle(
                        exploitation.make_job(checkpoint.tree, groups[index]), checkpoint.tree);
                    commit_job(index, std::move(job));
                    if (stop_hooks.after_n_jobs >= 0 && committed >= stop_hooks.after_n_jobs) {
                        throw StopRequested("stop after " + std::to_string(committed) + " jobs");
                    }
                }
            } else {
                // Bounded fan-out; commits are serialized under a mutex.
                std::mutex commit_mutex;
                std::exception_ptr first_error;
                std::atomic<size_t> next{0};
                int workers = std::min<int>(manifest_.backend.permits,
                                            static_cast<int>(pending.size()));
                std::vector<std::thread> pool;
                for (int w = 0; w < workers; ++w) {
                    pool.emplace_back([&]() {
                        while (true) {
                            size_t slot = next.fetch_add(1);
                            if (slot >= pending.size()) return;
                            size_t index = pending[slot];
                            try {
                                SectionJob job = exploitation.run_cycle(
                                    exploitation.make_job(checkpoint.tree, groups[index]),
                                    checkpoint.tree);
                                std::lock_guard<std::mutex> lock(commit_mutex);
                                commit_job(index, std::move(job));
                            } catch (...) {
                                std::lock_guard<std::mutex> lock(commit_mutex);
                                if (!first_error) first_error = std::current_exception();
                                return;
                            }
                        }
                    });
                }
                for (auto& t : pool) t.join();
                if (first_error) std::rethrow_exception(first_error);
            }

            manifest_.phase = Phase::assembling;
            snapshot_cursors();
            commit_manifest();
            for (auto& r : results) jobs.push_back(std::move(*r));
            if (stop_hooks.after_exploiting) throw StopRequested("stop after exploiting");
        } else {
            for (const auto& group : groups) {
                fs::path job_path = sections_dir / (group.group_node_id + ".json");
                jobs.push_back(parse_json_text<SectionJob>(
                    read_text_file(job_path.string()),
                    "section checkpoint " + job_path.string()));
            }
        }

        Manuscript manuscript;
        {
            PhaseTimer timer(manifest_.timing, "assembling");
            manuscript = assemble(checkpoint, jobs, make_polish_fn(), logger_);
            write_text_file_atomic((dir / "manuscript.json").string(),
                                   to_json(manuscript).dump(2) + "\n");
            write_text_file_atomic((dir / "manuscript.md").string(),
                                   render_markdown(manuscript, checkpoint.tree));
            manifest_.phase = Phase::done;
            snapshot_cursors();
            commit_manifest();
        }
        return manuscript;
    } catch (const StopRequested&) {
        throw;
    } catch (const SchemaError&) {
        throw;  // corrupted checkpoints refuse without mutating run state
    } catch (const Error&) {
        manifest_.failed_during = manifest_.phase;
        manifest_.phase = Phase::failed;
        commit_manifest();
        throw;
    }
}

}  // namespace litrev
