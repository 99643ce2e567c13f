#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "litrev/domain.hpp"
#include "litrev/llm_gateway.hpp"
#include "litrev/prompt_library.hpp"

namespace litrev {

enum class FetchedFrom { fulltext, abstract_fallback };

std::string to_string(FetchedFrom from);
FetchedFrom fetched_from_string(std::string_view name);

struct DocumentPages {
    std::string record_id;
    std::vector<std::string> pages;  // non-empty
    FetchedFrom fetched_from = FetchedFrom::abstract_fallback;
};

class CorpusError : public Error {
public:
    using Error::Error;
};

/// Resolves a fulltext locator to raw text. Returns nullopt when the locator
/// cannot be fetched (the store then falls back to the abstract).
class TextFetcher {
public:
    virtual ~TextFetcher() = default;
    virtual std::optional<std::string> fetch(const std::string& locator) = 0;
};

/// Local files; PDFs are converted through an external command when one is
/// configured (contract: `command <path>` writes UTF-8 text to stdout).
/// Relative locators resolve against base_dir. http(s) URLs are fetched with
/// a GET when allow_http is set.
class DefaultTextFetcher : public TextFetcher {
public:
    struct Options {
        std::string base_dir;
        std::string pdf_converter;  // e.g. "pdftotext {input} -"; empty disables PDFs
        bool allow_http = false;
        int timeout_seconds = 60;
    };
    explicit DefaultTextFetcher(Options options, Logger logger = {});
    std::optional<std::string> fetch(const std::string& locator) override;

private:
    Options options_;
    Logger logger_;
};

struct CorpusOptions {
    int window_words = 500;   // page size when no form feeds are present
    int window_overlap = 50;  // words shared between consecutive windows
};

/// Fetches, segments and caches source documents. Cache layout:
/// <cache_dir>/<record_id>.txt (pages joined by form feeds) plus
/// <cache_dir>/manifest.json. All writes are atomic; concurrent fetches of
/// the same record coalesce to one backend call.
class CorpusStore {
public:
    CorpusStore(std::string cache_dir, std::shared_ptr<TextFetcher> fetcher, LlmGateway& llm,
                const PromptLibrary& prompts, CorpusOptions options = {}, Logger logger = {});

    /// Resolves the record's full text into pages, falling back to the
    /// abstract as a single page. Throws CorpusError only when there is
    /// neither text nor an abstract.
    DocumentPages fetch_document(const LiteratureRecord& record);

    /// Asks the locating agent for up to `limit` page indices relevant to the
    /// focus. Out-of-range indices are dropped with a warning; the result is
    /// ascending and duplicate-free. Single-page documents return {0} without
    /// a gateway call.
    std::vector<int> preview_pages(const DocumentPages& doc, const std::string& focus, int limit);

    std::int64_t backend_fetch_count() const;

    /// Splits text into pages: on form feeds when any are present, otherwise
    /// fixed word windows with overlap.
    static std::vector<std::string> split_pages(const std::string& text,
                                                const CorpusOptions& options);

private:
    DocumentPages load_cached(const LiteratureRecord& record);
    void store_cache(const DocumentPages& doc);

    std::string cache_dir_;
    std::shared_ptr<TextFetcher> fetcher_;
    LlmGateway& llm_;
    const PromptLibrary& prompts_;
    CorpusOptions options_;
    Logger logger_;

    mutable std::mutex mutex_;
    std::map<std::string, DocumentPages> memory_cache_;
    std::map<std::string, std::shared_ptr<std::mutex>> inflight_;
    std::int64_t backend_fetches_ = 0;
};

}  // namespace litrev
