#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "litrev/domain.hpp"
#include "litrev/experience.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"

namespace litrev {

struct SearchQuery {
    std::string query_text;
    int max_results = 50;
    std::optional<std::pair<int, int>> year_range;
};

class SearchError : public Error {
public:
    using Error::Error;
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual std::vector<LiteratureRecord> run(const SearchQuery& query) = 0;
    virtual std::string id() const = 0;
};

/// Offline corpus backend. A record matches a query when every query token
/// appears among the tokens of its title plus abstract (case-insensitive).
/// Matches are returned in corpus order, truncated to max_results.
class FixtureSearchBackend : public SearchBackend {
public:
    explicit FixtureSearchBackend(std::vector<LiteratureRecord> corpus);
    static std::shared_ptr<FixtureSearchBackend> from_file(const std::string& path);

    std::vector<LiteratureRecord> run(const SearchQuery& query) override;
    std::string id() const override { return "fixture"; }

    const std::vector<LiteratureRecord>& corpus() const { return corpus_; }

private:
    std::vector<LiteratureRecord> corpus_;
};

struct HttpSearchOptions {
    std::string endpoint;  // e.g. https://api.semanticscholar.org
    std::string path = "/graph/v1/paper/search";
    std::string api_key;
    int timeout_seconds = 60;
    int rate_limit_retries = 3;
    int backoff_base_ms = 500;
    std::uint64_t seed = 0;
};

/// Scholarly-search API client (Semantic Scholar Graph style field mapping).
/// Rate-limit responses are retried with jittered backoff, then fail.
class HttpSearchBackend : public SearchBackend {
public:
    explicit HttpSearchBackend(HttpSearchOptions options);
    std::vector<LiteratureRecord> run(const SearchQuery& query) override;
    std::string id() const override { return "http-search"; }

private:
    HttpSearchOptions options_;
    std::uint64_t jitter_state_;
};

struct SearchGatewayOptions {
    int per_query_max_results = 50;
    int max_queries = 5;
};

/// Ranks records by citation count descending, ties broken by year
/// descending then record_id ascending, and returns the first
/// min(q, |records|).
std::vector<LiteratureRecord> select_top(std::vector<LiteratureRecord> records, int q);

class SearchGateway {
public:
    SearchGateway(LlmGateway& llm, std::shared_ptr<SearchBackend> backend,
                  const PromptLibrary& prompts, ExperienceEngine* experience = nullptr,
                  SearchGatewayOptions options = {}, Logger logger = {});

    /// Asks the searching agent for 1-5 deduplicated queries. When an
    /// experience engine is attached the formulation passes through the
    /// review loop.
    std::vector<SearchQuery> formulate_queries(const std::string& context);

    /// Union of per-query results, deduplicated by record_id, records missing
    /// title or abstract removed, output in the select_top canonical order.
    std::vector<LiteratureRecord> search(const std::vector<SearchQuery>& queries);

private:
    LlmGateway& llm_;
    std::shared_ptr<SearchBackend> backend_;
    const PromptLibrary& prompts_;
    ExperienceEngine* experience_;
    SearchGatewayOptions options_;
    Logger logger_;
};

}  // namespace litrev
