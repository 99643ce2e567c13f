// Regenerates the committed golden fixtures: the fixture corpus, the chat and
// judge scripts, and the expected manuscript produced by running the full
// pipeline over them. Usage: gen_golden <output-dir>

#include <cstdio>
#include <filesystem>

#include "litrev/orchestrator.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace litrev;
using namespace litrev::testsupport;

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: gen_golden <output-dir>\n");
        return 2;
    }
    std::string out_dir = argv[1];
    GoldenScenario scenario = GoldenScenario::build();
    scenario.write(out_dir);

    BackendSettings backend;
    backend.kind = "mock";
    backend.script_path = out_dir + "/chat_script.json";
    backend.corpus_path = out_dir + "/corpus.json";

    std::string checkpoints = temp_dir("gen-golden");
    Orchestrator orchestrator(checkpoints, "golden", backend, scenario.config);
    orchestrator.run(scenario.instruction);

    std::string manuscript = read_text_file(orchestrator.run_dir() + "/manuscript.md");
    write_text_file_atomic((fs::path(out_dir) / "manuscript.md").string(), manuscript);
    std::printf("wrote fixtures and expected manuscript to %s\n", out_dir.c_str());
    return 0;
}
