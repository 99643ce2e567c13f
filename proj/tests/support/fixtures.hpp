#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "litrev/domain.hpp"
#include "litrev/llm_gateway.hpp"

namespace litrev::testsupport {

/// Fresh unique directory under the system temp dir.
std::string temp_dir(const std::string& hint);

struct CaptureLog {
    std::vector<std::string> warnings;
    std::vector<std::string> all;
    std::mutex mutex;

    Logger logger();
    bool saw_warning(const std::string& needle) const;
};

LiteratureRecord make_record(const std::string& id, const std::string& title,
                             const std::string& abstract, int year, int citations);

/// Deterministic prose of roughly `target_words` words citing the given keys
/// (each key cited at least once, inside sentences, before the period).
std::string body_text(std::uint64_t seed, int target_words,
                      const std::vector<std::string>& cite_keys);

json corpus_json(const std::vector<LiteratureRecord>& records);
json script_json(const std::vector<ScriptEntry>& entries);  // grouped per agent_role

/// Routes scripted responses by request tag through callables; counts calls.
class DispatchBackend : public ChatBackend {
public:
    using Handler = std::function<std::string(const ChatRequest&, int call_index)>;

    void on(const std::string& tag, Handler handler);
    ChatResponse complete(const ChatRequest& request) override;
    std::string id() const override { return "dispatch"; }
    int calls(const std::string& tag) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Handler> handlers_;
    std::map<std::string, int> counts_;
};

/// A fully scripted end-to-end run: a 50-record corpus, a chat script that
/// drives a 4x4 outline tree with one review-comment cycle, and a judge
/// script for the eval harness. Deterministic for a fixed build.
struct GoldenScenario {
    UserInstruction instruction;
    RunConfig config;
    std::vector<LiteratureRecord> corpus;
    std::vector<ScriptEntry> chat_entries;
    std::vector<ScriptEntry> eval_entries;
    int group_count = 4;
    int records_per_group = 14;  // root scope (8) plus group scope (6)

    static GoldenScenario build();

    /// Writes corpus.json, chat_script.json and eval_script.json.
    void write(const std::string& dir) const;
};

/// Randomized scripted exploration run for invariant testing. The generator
/// plans the expansions itself (equal-split arithmetic, strict theta test,
/// depth cap) and emits exactly the script entries that plan implies, so a
/// divergent implementation either breaks an invariant or exhausts a queue.
struct ExplorationScenario {
    UserInstruction instruction;
    RunConfig config;
    std::vector<LiteratureRecord> corpus;
    std::vector<ScriptEntry> entries;

    static ExplorationScenario random(std::uint64_t seed);
};

}  // namespace litrev::testsupport
