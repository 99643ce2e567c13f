#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "litrev/search_gateway.hpp"
#include "litrev/text_metrics.hpp"
#include "support/fixtures.hpp"

using namespace litrev;
using namespace litrev::testsupport;

namespace {

struct Fixture {
    std::shared_ptr<ScriptedChatBackend> backend;
    std::unique_ptr<LlmGateway> gateway;
    PromptLibrary prompts;
    std::shared_ptr<FixtureSearchBackend> search_backend;
    std::unique_ptr<SearchGateway> gw;

    Fixture(std::vector<ScriptEntry> script, std::vector<LiteratureRecord> corpus) {
        backend = std::make_shared<ScriptedChatBackend>(std::move(script));
        gateway = std::make_unique<LlmGateway>(backend, GatewayOptions{});
        search_backend = std::make_shared<FixtureSearchBackend>(std::move(corpus));
        gw = std::make_unique<SearchGateway>(*gateway, search_backend, prompts, nullptr,
                                             SearchGatewayOptions{},
                                             Logger([](LogLevel, const std::string&) {}));
    }
};

std::string fenced_queries(const std::vector<std::string>& queries) {
    json q = json::array();
    for (const auto& s : queries) q.push_back(s);
    return "```json\n" + json{{"queries", q}}.dump() + "\n```";
}

}  // namespace

TEST_SUITE("search-gateway") {

TEST_CASE("formulate_queries returns scripted queries in order") {
    Fixture fx({{AgentRole::searcher, "query-formulate",
                 fenced_queries({"graph pooling", "spectral methods", "message passing"})}},
               {});
    auto queries = fx.gw->formulate_queries("graph neural networks");
    REQUIRE(queries.size() == 3);
    CHECK(queries[0].query_text == "graph pooling");
    CHECK(queries[2].query_text == "message passing");
}

TEST_CASE("duplicate query strings collapse to a unique set") {
    Fixture fx({{AgentRole::searcher, "query-formulate",
                 fenced_queries({"alpha", "Alpha", " alpha ", "beta"})}},
               {});
    auto queries = fx.gw->formulate_queries("context");
    REQUIRE(queries.size() == 2);
    CHECK(queries[0].query_text == "alpha");
    CHECK(queries[1].query_text == "beta");
}

TEST_CASE("more than five queries are clamped to five") {
    Fixture fx({{AgentRole::searcher, "query-formulate",
                 fenced_queries({"a", "b", "c", "d", "e", "f", "g"})}},
               {});
    CHECK(fx.gw->formulate_queries("context").size() == 5);
}

TEST_CASE("empty usable output after repair raises no-queries") {
    // Both the original response and the repair produce whitespace queries.
    Fixture fx({{AgentRole::searcher, "query-formulate", fenced_queries({"   "})},
                {AgentRole::searcher, "query-formulate", fenced_queries({"   "})}},
               {});
    CHECK_THROWS_WITH_AS(fx.gw->formulate_queries("context"), "no queries", SearchError);
}

TEST_CASE("empty context is rejected") {
    Fixture fx({}, {});
    CHECK_THROWS_AS(fx.gw->formulate_queries("   "), SearchError);
}

TEST_CASE("fixture search matches the keyword oracle") {
    std::vector<LiteratureRecord> corpus;
    // Twelve records carry both tokens, others only one or none.
    for (int i = 0; i < 12; ++i) {
        corpus.push_back(make_record("m" + std::to_string(i), "Graph neural inference " +
                                     std::to_string(i), "Study of graph neural models.", 2020,
                                     10 + i));
    }
    for (int i = 0; i < 20; ++i) {
        corpus.push_back(make_record("g" + std::to_string(i), "Graph theory note",
                                     "Classical results only.", 2019, 5));
    }
    for (int i = 0; i < 18; ++i) {
        corpus.push_back(make_record("x" + std::to_string(i), "Unrelated work",
                                     "Nothing relevant.", 2018, 3));
    }
    REQUIRE(corpus.size() == 50);
    Fixture fx({}, corpus);

    SearchQuery query;
    query.query_text = "graph neural";
    query.max_results = 50;
    auto hits = fx.gw->search({query});

    // Independent oracle: token-containment scan over the corpus.
    int expected = 0;
    for (const auto& r : corpus) {
        auto tokens = tokenize(r.title + " " + r.abstract);
        std::set<std::string> set(tokens.tokens.begin(), tokens.tokens.end());
        if (set.count("graph") && set.count("neural")) ++expected;
    }
    CHECK(expected == 12);
    CHECK(hits.size() == 12);
}

TEST_CASE("search deduplicates overlapping hits and drops incomplete records") {
    std::vector<LiteratureRecord> corpus;
    corpus.push_back(make_record("a", "alpha beta study", "covers alpha and beta.", 2020, 10));
    corpus.push_back(make_record("b", "alpha only", "covers alpha.", 2021, 20));
    LiteratureRecord no_abstract = make_record("c", "alpha beta empty", "", 2022, 30);
    corpus.push_back(no_abstract);

    Fixture fx({}, corpus);
    SearchQuery q1{"alpha", 50, std::nullopt};
    SearchQuery q2{"beta", 50, std::nullopt};
    auto hits = fx.gw->search({q1, q2});
    REQUIRE(hits.size() == 2);
    std::set<std::string> ids;
    for (const auto& h : hits) ids.insert(h.record_id);
    CHECK(ids == std::set<std::string>{"a", "b"});
}

TEST_CASE("fixture search honours year_range and max_results") {
    std::vector<LiteratureRecord> corpus;
    for (int year = 2015; year < 2025; ++year) {
        corpus.push_back(make_record("y" + std::to_string(year), "common token paper",
                                     "shared topic.", year, year - 2000));
    }
    Fixture fx({}, corpus);
    SearchQuery query{"common token", 50, std::make_pair(2018, 2020)};
    auto hits = fx.gw->search({query});
    CHECK(hits.size() == 3);

    SearchQuery truncated{"common token", 4, std::nullopt};
    CHECK(fx.search_backend->run(truncated).size() == 4);
}

TEST_CASE("select_top sorts, clamps and breaks ties deterministically") {
    std::vector<LiteratureRecord> records;
    records.push_back(make_record("a", "t", "x", 2020, 5));
    records.push_back(make_record("b", "t", "x", 2020, 9));
    records.push_back(make_record("c", "t", "x", 2020, 1));
    auto top = select_top(records, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].record_id == "b");
    CHECK(top[1].record_id == "a");

    CHECK(select_top(records, 10).size() == 3);  // clamp
    CHECK_THROWS_AS(select_top(records, 0), SearchError);
}

TEST_CASE("select_top matches a brute-force oracle and ignores input order") {
    std::mt19937_64 rng(31337);
    for (int round = 0; round < 20; ++round) {
        std::vector<LiteratureRecord> records;
        for (int i = 0; i < 200; ++i) {
            records.push_back(make_record("id" + std::to_string(i), "t", "x",
                                          2000 + static_cast<int>(rng() % 25),
                                          static_cast<int>(rng() % 40)));
        }
        auto oracle = records;
        std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
            if (a.citation_count != b.citation_count) return a.citation_count > b.citation_count;
            if (a.year != b.year) return a.year > b.year;
            return a.record_id < b.record_id;
        });
        oracle.resize(20);

        auto top = select_top(records, 20);
        REQUIRE(top.size() == 20);
        for (size_t i = 0; i < 20; ++i) CHECK(top[i].record_id == oracle[i].record_id);

        std::shuffle(records.begin(), records.end(), rng);
        auto permuted = select_top(records, 20);
        for (size_t i = 0; i < 20; ++i) CHECK(permuted[i].record_id == top[i].record_id);
    }
}

TEST_CASE("records without ids get the normalized title-year hash") {
    std::vector<LiteratureRecord> corpus;
    LiteratureRecord anon = make_record("", "Anonymous Paper", "about sorting.", 2019, 4);
    corpus.push_back(anon);
    Fixture fx({}, corpus);
    auto hits = fx.gw->search({SearchQuery{"sorting", 10, std::nullopt}});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].record_id == normalized_record_id("Anonymous Paper", 2019));
}

}  // TEST_SUITE
