#include "litrev/search_gateway.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "litrev/text_metrics.hpp"

namespace litrev {

// ---------------------------------------------------------------------------
// FixtureSearchBackend
// ---------------------------------------------------------------------------

FixtureSearchBackend::FixtureSearchBackend(std::vector<LiteratureRecord> corpus)
    : corpus_(std::move(corpus)) {}

std::shared_ptr<FixtureSearchBackend> FixtureSearchBackend::from_file(const std::string& path) {
    json j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw SchemaError("fixture corpus " + path + ": expected a JSON array");
    }
    std::vector<LiteratureRecord> corpus;
    for (const auto& e : j) {
        LiteratureRecord record;
        from_json_strict(e, record);
        corpus.push_back(std::move(record));
    }
    return std::make_shared<FixtureSearchBackend>(std::move(corpus));
}

std::vector<LiteratureRecord> FixtureSearchBackend::run(const SearchQuery& query) {
    TokenSequence query_tokens = tokenize(query.query_text);
    std::vector<LiteratureRecord> hits;
    for (const auto& record : corpus_) {
        if (static_cast<int>(hits.size()) >= query.max_results) break;
        if (query.year_range) {
            if (record.year < query.year_range->first || record.year > query.year_range->second)
                continue;
        }
        TokenSequence doc = tokenize(record.title + " " + record.abstract);
        std::unordered_set<std::string> doc_set(doc.tokens.begin(), doc.tokens.end());
        bool all = true;
        for (const auto& t : query_tokens.tokens) {
            if (!doc_set.count(t)) {
                all = false;
                break;
            }
        }
        if (all && !query_tokens.tokens.empty()) hits.push_back(record);
    }
    return hits;
}

// ---------------------------------------------------------------------------
// HttpSearchBackend
// ---------------------------------------------------------------------------

HttpSearchBackend::HttpSearchBackend(HttpSearchOptions options)
    : options_(std::move(options)), jitter_state_(options_.seed ^ 0xA5A5A5A55A5A5A5AULL) {
    if (options_.endpoint.empty()) throw SearchError("http search backend: endpoint not set");
}

std::vector<LiteratureRecord> HttpSearchBackend::run(const SearchQuery& query) {
    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);

    httplib::Params params{{"query", query.query_text},
                           {"limit", std::to_string(query.max_results)},
                           {"fields", "title,abstract,authors,year,citationCount,"
                                      "externalIds,openAccessPdf"}};
    if (query.year_range) {
        params.emplace("year", std::to_string(query.year_range->first) + "-" +
                                   std::to_string(query.year_range->second));
    }
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("x-api-key", options_.api_key);

    int attempts = 0;
    while (true) {
        ++attempts;
        auto result = client.Get(options_.path, params, headers);
        if (!result) {
            throw SearchError("search endpoint unreachable: " +
                              httplib::to_string(result.error()));
        }
        if (result->status == 429 || result->status >= 500) {
            if (attempts > options_.rate_limit_retries) {
                throw SearchError("search endpoint rate-limited after " +
                                  std::to_string(attempts) + " attempts");
            }
            jitter_state_ = jitter_state_ * 6364136223846793005ULL + 1442695040888963407ULL;
            int delay = options_.backoff_base_ms * (1 << (attempts - 1)) +
                        static_cast<int>((jitter_state_ >> 33) % 131);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            continue;
        }
        if (result->status != 200) {
            throw SearchError("search endpoint error (HTTP " + std::to_string(result->status) +
                              ")");
        }
        json j = json::parse(result->body, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("data") || !j["data"].is_array()) {
            throw SearchError("search endpoint returned an unexpected payload");
        }
        std::vector<LiteratureRecord> out;
        for (const auto& item : j["data"]) {
            LiteratureRecord record;
            record.source = SourceKind::live_api;
            record.title = item.value("title", "");
            if (item.contains("abstract") && item["abstract"].is_string()) {
                record.abstract = item["abstract"].get<std::string>();
            }
            record.year = item.contains("year") && item["year"].is_number_integer()
                              ? item["year"].get<int>()
                              : 0;
            record.citation_count =
                item.contains("citationCount") && item["citationCount"].is_number_integer()
                    ? std::max(0, item["citationCount"].get<int>())
                    : 0;
            if (item.contains("authors") && item["authors"].is_array()) {
                for (const auto& a : item["authors"]) {
                    if (a.is_object() && a.contains("name") && a["name"].is_string()) {
                        record.authors.push_back(a["name"].get<std::string>());
                    }
                }
            }
            if (item.contains("paperId") && item["paperId"].is_string()) {
                record.record_id = item["paperId"].get<std::string>();
            } else {
                record.record_id = normalized_record_id(record.title, record.year);
            }
            if (item.contains("openAccessPdf") && item["openAccessPdf"].is_object() &&
                item["openAccessPdf"].contains("url") &&
                item["openAccessPdf"]["url"].is_string()) {
                record.fulltext_locator = item["openAccessPdf"]["url"].get<std::string>();
            }
            out.push_back(std::move(record));
        }
        return out;
    }
}

// ---------------------------------------------------------------------------
// select_top
// ---------------------------------------------------------------------------

namespace {

bool rank_before(const LiteratureRecord& a, const LiteratureRecord& b) {
    if (a.citation_count != b.citation_count) return a.citation_count > b.citation_count;
    if (a.year != b.year) return a.year > b.year;
    return a.record_id < b.record_id;
}

}  // namespace

std::vector<LiteratureRecord> select_top(std::vector<LiteratureRecord> records, int q) {
    if (q < 1) throw SearchError("select_top requires q >= 1");
    std::sort(records.begin(), records.end(), rank_before);
    if (static_cast<int>(records.size()) > q) records.resize(static_cast<std::size_t>(q));
    return records;
}

// ---------------------------------------------------------------------------
// SearchGateway
// ---------------------------------------------------------------------------

SearchGateway::SearchGateway(LlmGateway& llm, std::shared_ptr<SearchBackend> backend,
                             const PromptLibrary& prompts, ExperienceEngine* experience,
                             SearchGatewayOptions options, Logger logger)
    : llm_(llm), backend_(std::move(backend)), prompts_(prompts), experience_(experience),
      options_(options), logger_(std::move(logger)) {
    if (!backend_) throw SearchError("search gateway requires a backend");
}

std::vector<SearchQuery> SearchGateway::formulate_queries(const std::string& context) {
    if (trim(context).empty()) throw SearchError("query formulation context is empty");

    ShapeSpec shape = shape_object_with_string_array("queries", 1);
    auto produce = [&](const std::optional<std::string>& comments) -> std::string {
        std::string comments_block;
        if (comments) comments_block = "\nReviewer comments to address:\n" + *comments + "\n";
        ChatRequest request;
        request.agent_role = AgentRole::searcher;
        request.request_tag = "query-formulate";
        request.system_prompt = prompts_.system_prompt(AgentRole::searcher);
        request.user_prompt =
            PromptLibrary::render(prompts_.get(AgentRole::searcher, "query-formulate"),
                                  {{"context", context}, {"comments_block", comments_block}});
        return complete_structured(llm_, request, shape).raw_text;
    };

    std::string text;
    if (experience_) {
        text = experience_->run_loop(produce, AgentRole::searcher).first;
    } else {
        text = produce(std::nullopt);
    }

    ChatResponse as_response;
    as_response.text = text;
    ParseOutcome parsed = parse_structured(as_response, shape);
    if (!parsed.value) {
        throw SearchError("query formulation produced no parseable queries: " +
                          parsed.report.message);
    }

    std::vector<SearchQuery> queries;
    std::set<std::string> seen;
    for (const auto& q : (*parsed.value)["queries"]) {
        std::string text_norm = trim(q.get<std::string>());
        if (text_norm.empty()) continue;
        std::string dedup_key = to_lower_ascii(text_norm);
        if (!seen.insert(dedup_key).second) continue;
        SearchQuery query;
        query.query_text = text_norm;
        query.max_results = options_.per_query_max_results;
        queries.push_back(std::move(query));
        if (static_cast<int>(queries.size()) >= options_.max_queries) break;
    }
    if (queries.empty()) throw SearchError("no queries");
    return queries;
}

std::vector<LiteratureRecord> SearchGateway::search(const std::vector<SearchQuery>& queries) {
    std::map<std::string, LiteratureRecord> by_id;
    for (const auto& query : queries) {
        std::vector<LiteratureRecord> hits = backend_->run(query);
        for (auto& record : hits) {
            if (record.record_id.empty()) {
                record.record_id = normalized_record_id(record.title, record.year);
            }
            if (trim(record.title).empty() || trim(record.abstract).empty()) {
                continue;  // incomplete entry
            }
            by_id.emplace(record.record_id, std::move(record));
        }
    }
    std::vector<LiteratureRecord> merged;
    merged.reserve(by_id.size());
    for (auto& [id, record] : by_id) {
        (void)id;
        merged.push_back(std::move(record));
    }
    // Canonical order so the merge is independent of query and arrival order.
    std::sort(merged.begin(), merged.end(), rank_before);
    return merged;
}

}  // namespace litrev
