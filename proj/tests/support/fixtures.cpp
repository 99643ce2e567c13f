#include "support/fixtures.hpp"

#include <atomic>
#include <deque>
#include <filesystem>

#include "litrev/common.hpp"
#include "litrev/text_metrics.hpp"

namespace fs = std::filesystem;

namespace litrev::testsupport {

std::string temp_dir(const std::string& hint) {
    static std::atomic<int> counter{0};
    fs::path base = fs::temp_directory_path() / "litrev-tests";
    fs::create_directories(base);
    fs::path dir;
    do {
        dir = base / (hint + "-" + std::to_string(::getpid()) + "-" +
                      std::to_string(counter.fetch_add(1)));
    } while (fs::exists(dir));
    fs::create_directories(dir);
    return dir.string();
}

Logger CaptureLog::logger() {
    return Logger([this](LogLevel level, const std::string& msg) {
        std::lock_guard<std::mutex> lock(mutex);
        all.push_back(msg);
        if (level == LogLevel::warn) warnings.push_back(msg);
    });
}

bool CaptureLog::saw_warning(const std::string& needle) const {
    for (const auto& w : warnings) {
        if (w.find(needle) != std::string::npos) return true;
    }
    return false;
}

LiteratureRecord make_record(const std::string& id, const std::string& title,
                             const std::string& abstract, int year, int citations) {
    LiteratureRecord record;
    record.record_id = id;
    record.title = title;
    record.abstract = abstract;
    record.authors = {"A. Researcher", "B. Scholar"};
    record.year = year;
    record.citation_count = citations;
    record.source = SourceKind::fixture;
    return record;
}

std::string body_text(std::uint64_t seed, int target_words,
                      const std::vector<std::string>& cite_keys) {
    static const std::vector<std::string> openers = {
        "Recent studies demonstrate", "Several groups report", "Early work established",
        "Follow-up analyses confirm", "Complementary experiments show",
        "A growing body of evidence indicates", "Independent evaluations reveal",
        "Controlled comparisons suggest"};
    static const std::vector<std::string> subjects = {
        "that distributed training preserves diagnostic accuracy",
        "that communication costs dominate wall-clock time",
        "that heterogeneous cohorts degrade naive averaging",
        "that privacy budgets interact with model capacity",
        "that site-specific calibration remains necessary",
        "that regulatory constraints shape deployment choices",
        "that benchmark reporting varies widely across sites",
        "that convergence behaviour depends on local epochs"};
    static const std::vector<std::string> closers = {
        "across multiple clinical datasets", "under realistic network conditions",
        "in multi-institutional trials", "for both segmentation and classification",
        "when labels are scarce", "despite considerable protocol variation",
        "over extended training horizons", "with modest computational overhead"};

    std::mt19937_64 rng(seed);
    std::string out;
    int words = 0;
    size_t key_index = 0;
    int sentence_index = 0;
    while (words < target_words) {
        const std::string& a = openers[rng() % openers.size()];
        const std::string& b = subjects[rng() % subjects.size()];
        const std::string& c = closers[rng() % closers.size()];
        std::string sentence = a + " " + b + " " + c;
        if (!cite_keys.empty() && sentence_index % 2 == 0) {
            sentence += " [" + cite_keys[key_index % cite_keys.size()] + "]";
            ++key_index;
        }
        sentence += ".";
        if (!out.empty()) out += " ";
        out += sentence;
        words += static_cast<int>(word_count(sentence));
        ++sentence_index;
    }
    return out;
}

json corpus_json(const std::vector<LiteratureRecord>& records) {
    json out = json::array();
    for (const auto& r : records) out.push_back(to_json(r));
    return out;
}

json script_json(const std::vector<ScriptEntry>& entries) {
    json out = json::object();
    for (const auto& e : entries) {
        std::string role = to_string(e.role);
        if (!out.contains(role)) out[role] = json::array();
        out[role].push_back(json{{"tag", e.tag}, {"text", e.text}});
    }
    return out;
}

// ---------------------------------------------------------------------------
// DispatchBackend
// ---------------------------------------------------------------------------

void DispatchBackend::on(const std::string& tag, Handler handler) {
    std::lock_guard<std::mutex> lock(mutex_);
    handlers_[tag] = std::move(handler);
}

ChatResponse DispatchBackend::complete(const ChatRequest& request) {
    Handler handler;
    int index;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = handlers_.find(request.request_tag);
        if (it == handlers_.end()) {
            throw ScriptMissError("dispatch backend has no handler for tag " +
                                  request.request_tag);
        }
        handler = it->second;
        index = counts_[request.request_tag]++;
    }
    ChatResponse response;
    response.text = handler(request, index);
    response.token_usage.prompt = static_cast<std::int64_t>(
        word_count(request.system_prompt) + word_count(request.user_prompt));
    response.token_usage.completion = static_cast<std::int64_t>(word_count(response.text));
    response.backend_id = id();
    return response;
}

int DispatchBackend::calls(const std::string& tag) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = counts_.find(tag);
    return it == counts_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------
// GoldenScenario
// ---------------------------------------------------------------------------

namespace {

std::string fenced(const json& j) { return "```json\n" + j.dump(2) + "\n```"; }

struct GroupPlan {
    std::string heading;
    std::string description;
    std::vector<std::string> leaf_headings;
    std::vector<std::string> own_record_ids;
};

}  // namespace

GoldenScenario GoldenScenario::build() {
    GoldenScenario scenario;
    scenario.instruction = {"Federated learning for medical imaging", 4000};
    scenario.config.theta_words = 500;
    scenario.config.d_max = 4;
    scenario.config.t_max = 4;
    scenario.config.epsilon = 0.80;
    scenario.config.experience_max_iters = 4;
    scenario.config.top_q_references = 20;
    scenario.config.deterministic_mode = true;
    scenario.config.seed = 7;

    const std::vector<GroupPlan> groups = {
        {"Privacy and Security Mechanisms",
         "Differential privacy, secure aggregation and attack surfaces.",
         {"Differential privacy budgets", "Secure aggregation protocols",
          "Membership inference attacks", "Threat models in hospitals"},
         {}},
        {"Aggregation and Optimization Strategies",
         "Server-side combination rules and their convergence behaviour.",
         {"Weighted averaging schemes", "Adaptive server optimizers",
          "Client drift correction", "Communication-efficient updates"},
         {}},
        {"Data Heterogeneity and Personalization",
         "Non-identical site distributions and per-site adaptation.",
         {"Scanner and protocol shift", "Label distribution skew",
          "Personalized model heads", "Domain adaptation layers"},
         {}},
        {"Clinical Evaluation and Deployment",
         "Validation practice, regulation and operational concerns.",
         {"Multi-site validation design", "Regulatory pathways",
          "Monitoring under drift", "Infrastructure requirements"},
         {}},
    };

    // Corpus: 8 records match the root scope, 6 match each group scope, plus
    // a remainder that no scripted query touches. Scope tags live in the
    // abstract so titles stay natural. Distinct citation counts keep ranking
    // deterministic.
    int record_number = 0;
    auto add_record = [&](const std::string& scope, const std::string& title_stem) {
        ++record_number;
        char id[16];
        std::snprintf(id, sizeof(id), "p%02d", record_number);
        std::string title = title_stem + " " + std::to_string(record_number);
        std::string abstract =
            "We study " + to_lower_ascii(title_stem) +
            " for cross-institutional medical image analysis, reporting accuracy, "
            "communication and privacy trade-offs. scopetag " + scope + ".";
        scenario.corpus.push_back(
            make_record(id, title, abstract, 2018 + (record_number % 7),
                        500 - record_number * 7));
        return std::string(id);
    };

    std::vector<std::string> root_ids;
    for (int i = 0; i < 8; ++i) {
        root_ids.push_back(add_record("rootscope", "A survey fragment on collaborative imaging"));
    }
    std::vector<GroupPlan> planned = groups;
    for (size_t g = 0; g < planned.size(); ++g) {
        static const char* stems[] = {"Privacy preserving training study",
                                      "Aggregation rule comparison",
                                      "Heterogeneous cohort analysis",
                                      "Clinical deployment report"};
        for (int i = 0; i < 6; ++i) {
            planned[g].own_record_ids.push_back(
                add_record("groupscope" + std::to_string(g + 1), stems[g]));
        }
    }
    while (record_number < 50) add_record("offtopic", "Unrelated archival note");

    auto& chat = scenario.chat_entries;
    auto accept = [&]() { chat.push_back({AgentRole::manager, "review", "ACCEPT"}); };

    // --- exploration: root expansion ---
    chat.push_back({AgentRole::searcher, "query-formulate",
                    fenced(json{{"queries", json::array({"rootscope"})}})});
    accept();
    json root_children = json::array();
    for (const auto& g : planned) {
        root_children.push_back(json{{"heading", g.heading}, {"description", g.description}});
    }
    chat.push_back({AgentRole::outliner, "outline-expand",
                    fenced(json{{"children", root_children}})});
    accept();

    // --- exploration: each depth-1 node expands into its leaves ---
    for (size_t g = 0; g < planned.size(); ++g) {
        chat.push_back({AgentRole::searcher, "query-formulate",
                        fenced(json{{"queries",
                                     json::array({"groupscope" + std::to_string(g + 1)})}})});
        accept();
        json children = json::array();
        for (const auto& leaf : planned[g].leaf_headings) {
            children.push_back(json{{"heading", leaf},
                                    {"description", "Covers " + to_lower_ascii(leaf) + "."}});
        }
        chat.push_back({AgentRole::outliner, "outline-expand",
                        fenced(json{{"children", children}})});
        accept();
    }

    // --- exploitation: per group, in tree pre-order ---
    std::vector<std::string> bodies;
    for (size_t g = 0; g < planned.size(); ++g) {
        int literature = static_cast<int>(root_ids.size() + planned[g].own_record_ids.size());

        // locate_initial: one extraction per record, reviewed.
        for (int r = 0; r < literature; ++r) {
            chat.push_back(
                {AgentRole::locator, "snippet-extract",
                 fenced(json{{"snippets",
                              json::array({json{{"text", "Initial finding " + std::to_string(r) +
                                                             ": reported gains generalize across "
                                                             "sites."},
                                                {"page_hint", nullptr}},
                                           json{{"text", "Initial finding " + std::to_string(r) +
                                                             "b: privacy constraints alter "
                                                             "optimization dynamics."},
                                                {"page_hint", nullptr}}})}})});
            accept();
        }

        // Cited keys: three of the group's own records plus one root record.
        std::vector<std::string> cite_keys = {planned[g].own_record_ids[0],
                                              planned[g].own_record_ids[1],
                                              planned[g].own_record_ids[2],
                                              root_ids[g % root_ids.size()]};
        std::string body = body_text(1000 + static_cast<std::uint64_t>(g), 950, cite_keys);
        bodies.push_back(body);

        if (g == 0) {
            // One review-comment cycle on the first draft.
            std::string rough = body_text(9999, 400, cite_keys);
            chat.push_back({AgentRole::drafter, "section-draft", fenced(json{{"body", rough}})});
            chat.push_back({AgentRole::manager, "review",
                            "Expand the draft toward the word budget. Keep every claim cited."});
            chat.push_back({AgentRole::drafter, "section-draft", fenced(json{{"body", body}})});
            accept();
        } else {
            chat.push_back({AgentRole::drafter, "section-draft", fenced(json{{"body", body}})});
            accept();
        }

        // locate_refine: new snippets, distinct text from iteration 0.
        for (int r = 0; r < literature; ++r) {
            chat.push_back(
                {AgentRole::locator, "snippet-extract",
                 fenced(json{{"snippets",
                              json::array({json{{"text", "Refined finding " + std::to_string(r) +
                                                             ": later replications narrow the "
                                                             "confidence intervals."},
                                                {"page_hint", nullptr}}})}})});
            accept();
        }

        // draft_refine returns the identical body: psi = 1.0, stop at t* = 1.
        chat.push_back({AgentRole::drafter, "section-refine", fenced(json{{"body", body}})});
        accept();
    }

    // --- assembly polish: identity pass ---
    json polished = json::array();
    for (const auto& b : bodies) polished.push_back(b);
    chat.push_back({AgentRole::drafter, "assemble-polish",
                    fenced(json{{"sections", polished}})});
    accept();

    // --- eval script: every claim judged supported except two; rubrics ---
    int claims = 0;
    for (const auto& b : bodies) {
        for (const auto& sentence : split_sentences(b)) {
            if (!citation_keys(sentence).empty()) ++claims;
        }
    }
    for (int i = 0; i < claims; ++i) {
        scenario.eval_entries.push_back({AgentRole::manager, "support-judge",
                                         i % 9 == 8 ? "unsupported" : "supported"});
    }
    scenario.eval_entries.push_back({AgentRole::manager, "rubric-coverage", "4.5"});
    scenario.eval_entries.push_back({AgentRole::manager, "rubric-structure", "5"});
    scenario.eval_entries.push_back({AgentRole::manager, "rubric-relevance", "4.5"});

    return scenario;
}

void GoldenScenario::write(const std::string& dir) const {
    ensure_directory(dir);
    write_text_file_atomic((fs::path(dir) / "corpus.json").string(),
                           corpus_json(corpus).dump(2) + "\n");
    write_text_file_atomic((fs::path(dir) / "chat_script.json").string(),
                           script_json(chat_entries).dump(2) + "\n");
    write_text_file_atomic((fs::path(dir) / "eval_script.json").string(),
                           script_json(eval_entries).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// ExplorationScenario
// ---------------------------------------------------------------------------

ExplorationScenario ExplorationScenario::random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ExplorationScenario scenario;
    scenario.config.theta_words = 500;
    scenario.config.d_max = 4;
    scenario.config.deterministic_mode = true;
    scenario.config.seed = seed;
    scenario.config.top_q_references = 3 + static_cast<int>(rng() % 18);

    std::uniform_int_distribution<int> child_count(2, 6);

    int target;
    switch (seed % 5) {
        case 0: {
            // Children land exactly on theta: strictly-greater must NOT expand.
            int j = child_count(rng);
            target = 500 * j;
            break;
        }
        case 1: {
            // Children land at theta + 1: must expand (depth permitting).
            int j = child_count(rng);
            target = 501 * j;
            break;
        }
        case 2:
            target = 60000 + static_cast<int>(rng() % 40000);  // depth cap binds
            break;
        default:
            target = 600 + static_cast<int>(rng() % 19400);
            break;
    }
    scenario.instruction = {"Scripted exploration topic " + std::to_string(seed), target};

    struct Plan {
        int budget;
        int depth;  // depth of the node itself; root uses 0
    };

    int scope_counter = 0;
    int record_counter = 0;
    auto plan_expansion = [&](int budget, int depth_of_children) -> std::vector<Plan> {
        // Emit corpus records and script entries for one expansion.
        ++scope_counter;
        std::string scope = "scope" + std::to_string(scope_counter);
        int n_records = 2 + static_cast<int>(rng() % 3);
        for (int i = 0; i < n_records; ++i) {
            ++record_counter;
            scenario.corpus.push_back(make_record(
                "r" + std::to_string(record_counter),
                "Record " + std::to_string(record_counter),
                "Abstract mentioning " + scope + " for retrieval.", 2015 + (record_counter % 10),
                static_cast<int>(rng() % 1000)));
        }
        scenario.entries.push_back({AgentRole::searcher, "query-formulate",
                                    fenced(json{{"queries", json::array({scope})}})});
        int j = child_count(rng);
        json children = json::array();
        for (int c = 0; c < j; ++c) {
            children.push_back(json{
                {"heading", "Direction " + std::to_string(scope_counter) + "." + std::to_string(c)},
                {"description", "Scripted sub-direction."}});
        }
        scenario.entries.push_back({AgentRole::outliner, "outline-expand",
                                    fenced(json{{"children", children}})});

        // Equal split, remainder to the first child (independent arithmetic).
        std::vector<Plan> plans;
        int base = budget / j;
        int remainder = budget - base * j;
        for (int c = 0; c < j; ++c) {
            plans.push_back({base + (c == 0 ? remainder : 0), depth_of_children});
        }
        return plans;
    };

    std::deque<Plan> frontier;
    for (Plan& p : plan_expansion(target, 1)) frontier.push_back(p);
    while (!frontier.empty()) {
        Plan p = frontier.front();
        frontier.pop_front();
        bool expand = p.budget > scenario.config.theta_words && p.depth < scenario.config.d_max;
        if (!expand) continue;
        for (Plan& c : plan_expansion(p.budget, p.depth + 1)) frontier.push_back(c);
    }
    return scenario;
}

}  // namespace litrev::testsupport
