#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "litrev/eval_harness.hpp"
#include "support/fixtures.hpp"

using namespace litrev;
using namespace litrev::testsupport;

namespace {

Manuscript manuscript_with_bodies(const std::vector<std::string>& bodies,
                                  const std::vector<std::string>& record_ids) {
    Manuscript m;
    m.title = "fixture review";
    for (size_t i = 0; i < record_ids.size(); ++i) {
        m.bibliography.push_back(make_record(record_ids[i], "Title " + record_ids[i],
                                             "Abstract for " + record_ids[i] + ".", 2020,
                                             static_cast<int>(10 + i)));
        m.citation_map[record_ids[i]] = static_cast<int>(i);
    }
    int n = 0;
    for (const auto& body : bodies) {
        DraftSection section;
        section.section_node_id = "s" + std::to_string(++n);
        DraftRevision revision;
        revision.iteration = 0;
        revision.body = body;
        revision.cited_record_ids = citation_keys(body);
        section.revisions.push_back(std::move(revision));
        section.final_iteration = 0;
        m.sections.push_back(std::move(section));
    }
    return m;
}

struct JudgeFixture {
    std::shared_ptr<ScriptedChatBackend> backend;
    std::unique_ptr<LlmGateway> gateway;
    PromptLibrary prompts;
    CaptureLog log;
    std::unique_ptr<EvalHarness> harness;

    explicit JudgeFixture(std::vector<ScriptEntry> script) {
        backend = std::make_shared<ScriptedChatBackend>(std::move(script));
        gateway = std::make_unique<LlmGateway>(backend, GatewayOptions{});
        harness = std::make_unique<EvalHarness>(*gateway, prompts, log.logger());
    }
};

std::vector<ScriptEntry> judge_entries(const std::vector<std::string>& verdicts) {
    std::vector<ScriptEntry> entries;
    for (const auto& v : verdicts) {
        entries.push_back({AgentRole::manager, "support-judge", v});
    }
    entries.push_back({AgentRole::manager, "rubric-coverage", "4.5"});
    entries.push_back({AgentRole::manager, "rubric-structure", "5"});
    entries.push_back({AgentRole::manager, "rubric-relevance", "3.5"});
    return entries;
}

}  // namespace

TEST_SUITE("eval-harness") {

TEST_CASE("extract_claims: cited sentences become claims, others are recorded") {
    Manuscript m = manuscript_with_bodies({"X improves Y [a]. We discuss Z."}, {"a"});
    ClaimExtraction extraction = extract_claims(m);
    REQUIRE(extraction.claims.size() == 1);
    CHECK(extraction.claims[0].text == "X improves Y [a].");
    CHECK(extraction.claims[0].cited_keys == std::vector<std::string>{"a"});
    REQUIRE(extraction.uncited_sentences.size() == 1);
    CHECK(extraction.uncited_sentences[0] == "We discuss Z.");
}

TEST_CASE("a multi-cite sentence is one claim with all keys") {
    Manuscript m = manuscript_with_bodies({"Both agree [a][b]."}, {"a", "b"});
    ClaimExtraction extraction = extract_claims(m);
    REQUIRE(extraction.claims.size() == 1);
    CHECK(extraction.claims[0].cited_keys == std::vector<std::string>{"a", "b"});
}

TEST_CASE("unresolvable bracketed tokens are not claims") {
    Manuscript m = manuscript_with_bodies({"Bracketed [note] but never cited."}, {"a"});
    ClaimExtraction extraction = extract_claims(m);
    CHECK(extraction.claims.empty());
    CHECK(extraction.uncited_sentences.size() == 1);
}

TEST_CASE("empty manuscript yields no claims") {
    Manuscript m;
    m.title = "empty";
    CHECK(extract_claims(m).claims.empty());
}

TEST_CASE("verdict parsing tolerates case and whitespace") {
    JudgeFixture fx({{AgentRole::manager, "support-judge", "  SUPPORTED \n"},
                     {AgentRole::manager, "support-judge", "Unsupported."},
                     {AgentRole::manager, "support-judge", "cannot tell"}});
    CHECK(fx.harness->judge_support("claim", "source") == Verdict::supported);
    CHECK(fx.harness->judge_support("claim", "source") == Verdict::unsupported);
    CHECK(fx.harness->judge_support("claim", "source") == Verdict::unjudged);
}

TEST_CASE("missing source text leaves the pair unjudged without a call") {
    JudgeFixture fx({});
    CHECK(fx.harness->judge_support("claim", "   ") == Verdict::unjudged);
}

TEST_CASE("hand-built fixture: recall 80.0 and precision 75.0 exactly") {
    // Ten statements, twelve citation instances. s1..s6 cite one key each
    // (supported); s7 cites two (one pair unsupported, union supported);
    // s8 cites two (both supported, union supported); s9 and s10 cite one
    // each, unsupported.
    std::string section_one =
        "Claim one holds [a]. Claim two holds [b]. Claim three holds [c]. "
        "Claim four holds [d]. Claim five holds [a]. Claim six holds [b].";
    std::string section_two =
        "Claim seven spans sources [a][b]. Claim eight spans sources [c][d]. "
        "Claim nine fails [c]. Claim ten fails [d]. A closing remark without citations.";
    Manuscript m = manuscript_with_bodies({section_one, section_two}, {"a", "b", "c", "d"});

    std::vector<std::string> verdicts = {
        // s1..s6 pair calls
        "supported", "supported", "supported", "supported", "supported", "supported",
        // s7: pairs a+, b-, then the union call
        "supported", "unsupported", "supported",
        // s8: pairs c+, d+, then the union call
        "supported", "supported", "supported",
        // s9, s10
        "unsupported", "unsupported"};
    JudgeFixture fx(judge_entries(verdicts));
    EvalReport report = fx.harness->evaluate(m, {});

    CHECK(report.counts.total_statements == 10);
    CHECK(report.counts.supported_statements == 8);
    CHECK(report.counts.total_citations == 12);
    CHECK(report.counts.supporting_citations == 9);
    CHECK(report.citation_recall == 80.0);
    CHECK(report.citation_precision == 75.0);
    CHECK(report.coverage == 4.5);  // fractional scores preserved
    CHECK(report.structure == 5.0);
    CHECK(report.relevance == 3.5);
    CHECK(report.uncited_sentences.size() == 1);

    json j = to_json(report);
    CHECK(j["citation_recall"] == 80.0);
    CHECK(j["counts"]["total_citations"] == 12);
}

TEST_CASE("gateway failures mark pairs unjudged and exclude them from ratios") {
    // One claim, one key; the judge call script is empty, so the call fails
    // and the pair is excluded with a warning.
    Manuscript m = manuscript_with_bodies({"Lone claim [a]."}, {"a"});
    JudgeFixture fx({{AgentRole::manager, "rubric-coverage", "4"},
                     {AgentRole::manager, "rubric-structure", "4"},
                     {AgentRole::manager, "rubric-relevance", "4"}});
    EvalReport report = fx.harness->evaluate(m, {});
    CHECK(report.counts.total_statements == 0);
    CHECK(report.counts.unjudged_statements == 1);
    CHECK(report.counts.unjudged_citations == 1);
    CHECK(report.citation_recall == 0.0);
    CHECK(fx.log.saw_warning("unjudged"));
}

TEST_CASE("monotonicity: removing a supported claim never increases recall") {
    auto judgment = [](bool supported) {
        ClaimJudgment j;
        j.claim = {"text [a].", {"a"}};
        j.citation_verdicts = {supported ? Verdict::supported : Verdict::unsupported};
        j.statement_verdict = supported ? Verdict::supported : Verdict::unsupported;
        return j;
    };
    std::vector<ClaimJudgment> base;
    for (int i = 0; i < 7; ++i) base.push_back(judgment(i % 2 == 0));
    double baseline = recall_percent(tally(base));

    for (size_t drop = 0; drop < base.size(); ++drop) {
        if (base[drop].statement_verdict != Verdict::supported) continue;
        std::vector<ClaimJudgment> reduced = base;
        reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(drop));
        CHECK(recall_percent(tally(reduced)) <= baseline);
    }

    // Adding an unsupported citation never increases precision.
    double precision_before = precision_percent(tally(base));
    std::vector<ClaimJudgment> extended = base;
    extended[0].citation_verdicts.push_back(Verdict::unsupported);
    CHECK(precision_percent(tally(extended)) <= precision_before);
}

TEST_CASE("snippets augment the judged source text") {
    Manuscript m = manuscript_with_bodies({"Claim [a]."}, {"a"});
    auto dispatch = std::make_shared<DispatchBackend>();
    std::string seen_source;
    dispatch->on("support-judge", [&](const ChatRequest& request, int) {
        seen_source = request.user_prompt;
        return "supported";
    });
    dispatch->on("rubric-coverage", [](const ChatRequest&, int) { return "4"; });
    dispatch->on("rubric-structure", [](const ChatRequest&, int) { return "4"; });
    dispatch->on("rubric-relevance", [](const ChatRequest&, int) { return "4"; });
    LlmGateway gateway(dispatch, {});
    PromptLibrary prompts;
    EvalHarness harness(gateway, prompts);
    harness.evaluate(m, {{"a", {"stored snippet text"}}});
    CHECK(seen_source.find("stored snippet text") != std::string::npos);
    CHECK(seen_source.find("Abstract for a.") != std::string::npos);
}

}  // TEST_SUITE
