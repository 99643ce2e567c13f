#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "litrev/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace litrev;

namespace {

std::string default_run_id(const std::string& topic, const RunConfig& config) {
    if (config.deterministic_mode) {
        return "run-" + hex64(fnv1a64(topic + "#" + std::to_string(config.seed))).substr(0, 12);
    }
    auto now = std::chrono::system_clock::now().time_since_epoch();
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    return "run-" + std::to_string(ms);
}

int run_generate(const std::string& topic, int target_length, RunConfig config,
                 BackendSettings backend, const std::string& checkpoint_dir,
                 const std::string& resume_id, const std::string& run_id_flag) {
    if (!resume_id.empty()) {
        Orchestrator orchestrator(checkpoint_dir, resume_id, backend, config);
        Manuscript manuscript = orchestrator.resume();
        std::cout << "resumed run " << resume_id << ": " << manuscript.sections.size()
                  << " sections, " << manuscript.bibliography.size() << " references\n";
        std::cout << "manuscript: " << orchestrator.run_dir() << "/manuscript.md\n";
        return 0;
    }

    if (topic.empty() || target_length < 1) {
        std::cerr << "generate requires --topic and a positive --target-length\n";
        return 2;
    }
    UserInstruction instruction{topic, target_length};
    std::string run_id = run_id_flag.empty() ? default_run_id(topic, config) : run_id_flag;
    Orchestrator orchestrator(checkpoint_dir, run_id, backend, config);
    Manuscript manuscript = orchestrator.run(instruction);
    std::cout << "run " << run_id << " done: " << manuscript.sections.size() << " sections, "
              << manuscript.bibliography.size() << " references\n";
    std::cout << "manuscript: " << orchestrator.run_dir() << "/manuscript.md\n";
    return 0;
}

int run_inspect(const std::string& checkpoint_dir, const std::string& run_id) {
    RunManifest manifest = Orchestrator::load_manifest(checkpoint_dir, run_id);
    std::cout << "run " << manifest.run_id << "\n";
    std::cout << "  topic: " << manifest.instruction.topic_text << "\n";
    std::cout << "  target length: " << manifest.instruction.target_length_words << " words\n";
    std::cout << "  phase: " << to_string(manifest.phase);
    if (manifest.failed_during) std::cout << " (failed during " << to_string(*manifest.failed_during) << ")";
    std::cout << "\n";
    std::cout << "  backend: " << manifest.backend.kind << "\n";
    std::cout << "  completed section jobs: " << manifest.completed_jobs.size() << "\n";
    std::cout << "  tokens: prompt " << manifest.token_totals.prompt << ", completion "
              << manifest.token_totals.completion << "\n";
    for (const auto& [phase, seconds] : manifest.timing) {
        std::printf("  %s: %.2fs\n", phase.c_str(), seconds);
    }
    return 0;
}

int run_eval(const std::string& checkpoint_dir, const std::string& run_id, bool full_text,
             const std::string& script_override, const std::string& prompt_dir) {
    RunManifest manifest = Orchestrator::load_manifest(checkpoint_dir, run_id);
    fs::path run_dir = fs::path(checkpoint_dir) / run_id;
    fs::path manuscript_path = run_dir / "manuscript.json";
    if (!file_exists(manuscript_path.string())) {
        std::cerr << "run " << run_id << " has no manuscript.json (phase "
                  << to_string(manifest.phase) << ")\n";
        return 1;
    }
    Manuscript manuscript = parse_json_text<Manuscript>(
        read_text_file(manuscript_path.string()), "manuscript.json");

    std::shared_ptr<ChatBackend> backend;
    if (manifest.backend.kind == "mock" || !script_override.empty()) {
        std::string script = !script_override.empty() ? script_override
                                                      : manifest.backend.script_path;
        backend = ScriptedChatBackend::from_file(script);
    } else {
        HttpChatOptions chat;
        chat.endpoint = manifest.backend.chat_endpoint;
        chat.model = manifest.backend.chat_model;
        const char* key = std::getenv(manifest.backend.api_key_env.c_str());
        if (!key) key = std::getenv("OPENAI_API_KEY");
        if (key) chat.api_key = key;
        backend = std::make_shared<HttpChatBackend>(chat);
    }
    GatewayOptions options;
    options.deterministic = manifest.config.deterministic_mode;
    LlmGateway gateway(backend, options);
    PromptLibrary prompts = prompt_dir.empty() ? PromptLibrary() : PromptLibrary(prompt_dir);

    // Stored snippets augment each record's abstract as judged source text.
    std::map<std::string, std::vector<std::string>> snippets_by_record;
    fs::path sections_dir = run_dir / "sections";
    if (fs::exists(sections_dir)) {
        for (const auto& entry : fs::directory_iterator(sections_dir)) {
            if (entry.path().extension() != ".json") continue;
            SectionJob job = parse_json_text<SectionJob>(read_text_file(entry.path().string()),
                                                         entry.path().string());
            for (const auto& [iteration, snippets] : job.snippets_by_iteration) {
                (void)iteration;
                for (const auto& s : snippets) {
                    snippets_by_record[s.source_record_id].push_back(s.text);
                }
            }
        }
    }
    if (full_text) {
        // Judge against the cached document pages as well, not just abstracts.
        for (const auto& record : manuscript.bibliography) {
            fs::path cached = run_dir / "corpus" / (record.record_id + ".txt");
            if (file_exists(cached.string())) {
                std::string pages = read_text_file(cached.string());
                std::replace(pages.begin(), pages.end(), '\f', '\n');
                snippets_by_record[record.record_id].push_back(pages);
            }
        }
    }

    EvalHarness harness(gateway, prompts);
    EvalReport report = harness.evaluate(manuscript, snippets_by_record);
    write_text_file_atomic((run_dir / "eval.json").string(), to_json(report).dump(2) + "\n");

    std::printf("citation recall:    %.2f%% (%d/%d statements)\n", report.citation_recall,
                report.counts.supported_statements, report.counts.total_statements);
    std::printf("citation precision: %.2f%% (%d/%d citations)\n", report.citation_precision,
                report.counts.supporting_citations, report.counts.total_citations);
    std::printf("coverage %.2f  structure %.2f  relevance %.2f\n", report.coverage,
                report.structure, report.relevance);
    std::cout << "report: " << (run_dir / "eval.json").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"litrev: multi-agent literature review generation"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "Generate a literature review");
    std::string topic;
    int target_length = 0;
    RunConfig config;
    BackendSettings backend;
    std::string checkpoint_dir = "checkpoints";
    std::string resume_id;
    std::string run_id;
    std::string psi = "f1";
    generate->add_option("--topic", topic, "Research topic");
    generate->add_option("--target-length", target_length, "Total word budget");
    generate->add_option("--theta", config.theta_words, "Decomposition threshold (words)");
    generate->add_option("--dmax", config.d_max, "Maximum tree depth");
    generate->add_option("--tmax", config.t_max, "Maximum refinement iterations per section");
    generate->add_option("--epsilon", config.epsilon, "Draft similarity threshold");
    generate->add_option("--top-q", config.top_q_references, "References kept per search");
    generate->add_option("--experience-iters", config.experience_max_iters,
                         "Review/revise iteration cap");
    generate->add_option("--preview-limit", config.preview_page_limit,
                         "Pages previewed per document");
    generate->add_option("--psi", psi, "Similarity variant: f1 or recall");
    generate->add_flag("--deterministic", config.deterministic_mode,
                       "Deterministic mode (temperature 0, sequential jobs)");
    generate->add_option("--seed", config.seed, "Seed for jittered backoff");
    bool no_polish = false;
    generate->add_flag("--no-polish", no_polish, "Skip the assembly coherence pass");
    generate->add_option("--backend", backend.kind, "Backend: live or mock")
        ->check(CLI::IsMember({"live", "mock"}));
    generate->add_option("--script", backend.script_path, "Mock chat script file");
    generate->add_option("--corpus", backend.corpus_path, "Fixture corpus file");
    generate->add_option("--prompt-dir", backend.prompt_dir, "Prompt asset override directory");
    generate->add_option("--chat-endpoint", backend.chat_endpoint,
                         "Chat endpoint (or LITREV_CHAT_ENDPOINT)");
    generate->add_option("--model", backend.chat_model, "Chat model (or LITREV_MODEL)");
    generate->add_option("--search-endpoint", backend.search_endpoint,
                         "Search endpoint (or LITREV_SEARCH_ENDPOINT)");
    generate->add_option("--pdf-converter", backend.pdf_converter,
                         "PDF-to-text command, '{input}' placeholder");
    generate->add_option("--experience-store", backend.experience_store,
                         "Shared experience store path");
    generate->add_option("--permits", backend.permits, "Concurrent section jobs / requests");
    generate->add_option("--checkpoint-dir", checkpoint_dir, "Checkpoint root directory");
    generate->add_option("--resume", resume_id, "Resume an existing run id");
    generate->add_option("--run-id", run_id, "Explicit run id");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print a run manifest");
    std::string inspect_run;
    std::string inspect_dir = "checkpoints";
    inspect->add_option("run_id", inspect_run, "Run id")->required();
    inspect->add_option("--checkpoint-dir", inspect_dir, "Checkpoint root directory");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a finished run");
    std::string eval_run;
    std::string eval_dir = "checkpoints";
    std::string eval_script;
    std::string eval_prompts;
    bool full_text = false;
    eval->add_option("run_id", eval_run, "Run id")->required();
    eval->add_option("--checkpoint-dir", eval_dir, "Checkpoint root directory");
    eval->add_flag("--full-text", full_text, "Judge against full text, not just abstracts");
    eval->add_option("--script", eval_script, "Scripted judge responses (mock evaluation)");
    eval->add_option("--prompt-dir", eval_prompts, "Prompt asset override directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            config.psi_variant = rouge_variant_from_string(psi);
            config.polish_enabled = !no_polish;
            return run_generate(topic, target_length, config, backend, checkpoint_dir,
                                resume_id, run_id);
        }
        if (inspect->parsed()) return run_inspect(inspect_dir, inspect_run);
        if (eval->parsed()) return run_eval(eval_dir, eval_run, full_text, eval_script,
                                            eval_prompts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
