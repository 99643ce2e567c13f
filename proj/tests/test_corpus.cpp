#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "litrev/corpus.hpp"
#include "litrev/text_metrics.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using namespace litrev;
using namespace litrev::testsupport;

namespace {

class CountingFetcher : public TextFetcher {
public:
    explicit CountingFetcher(std::map<std::string, std::string> docs) : docs_(std::move(docs)) {}
    std::optional<std::string> fetch(const std::string& locator) override {
        ++calls;
        auto it = docs_.find(locator);
        if (it == docs_.end()) return std::nullopt;
        return it->second;
    }
    int calls = 0;

private:
    std::map<std::string, std::string> docs_;
};

struct Fixture {
    std::string dir = temp_dir("corpus");
    std::shared_ptr<CountingFetcher> fetcher;
    std::shared_ptr<DispatchBackend> chat = std::make_shared<DispatchBackend>();
    std::unique_ptr<LlmGateway> gateway;
    PromptLibrary prompts;
    CaptureLog log;
    std::unique_ptr<CorpusStore> store;

    Fixture() : Fixture(std::map<std::string, std::string>{}) {}
    explicit Fixture(std::map<std::string, std::string> docs) {
        fetcher = std::make_shared<CountingFetcher>(std::move(docs));
        gateway = std::make_unique<LlmGateway>(chat, GatewayOptions{});
        store = std::make_unique<CorpusStore>(dir + "/cache", fetcher, *gateway, prompts,
                                              CorpusOptions{}, log.logger());
    }
};

std::string words(int n, const std::string& stem) {
    std::string out;
    for (int i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += stem + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("form-feed separated text splits into pages") {
    Fixture fx(std::map<std::string, std::string>{{"doc://a", "page one text\fpage two text\fpage three text"}});
    LiteratureRecord record = make_record("a", "T", "Abstract.", 2020, 1);
    record.fulltext_locator = "doc://a";
    DocumentPages doc = fx.store->fetch_document(record);
    CHECK(doc.fetched_from == FetchedFrom::fulltext);
    REQUIRE(doc.pages.size() == 3);
    CHECK(doc.pages[1] == "page two text");
}

TEST_CASE("window splitting covers the text with the configured overlap") {
    std::string text = words(1100, "w");
    auto pages = CorpusStore::split_pages(text, CorpusOptions{});
    REQUIRE(pages.size() == 3);
    CHECK(word_count(pages[0]) == 500);
    CHECK(word_count(pages[1]) == 500);
    CHECK(word_count(pages[2]) == 200);  // tail window 900..1100
    // Overlap: last 50 words of page 0 open page 1.
    CHECK(pages[1].rfind("w450", 0) == 0);
}

TEST_CASE("dead locator with an abstract falls back to a single page") {
    Fixture fx;
    LiteratureRecord record = make_record("b", "T", "The abstract body.", 2020, 1);
    record.fulltext_locator = "doc://missing";
    DocumentPages doc = fx.store->fetch_document(record);
    CHECK(doc.fetched_from == FetchedFrom::abstract_fallback);
    REQUIRE(doc.pages.size() == 1);
    CHECK(doc.pages[0] == "The abstract body.");
}

TEST_CASE("fetch failure with no abstract is an error") {
    Fixture fx;
    LiteratureRecord record = make_record("c", "T", "x", 2020, 1);
    record.abstract = "   ";
    record.fulltext_locator = "doc://missing";
    CHECK_THROWS_AS(fx.store->fetch_document(record), CorpusError);
}

TEST_CASE("second fetch is served from cache with zero backend calls") {
    Fixture fx(std::map<std::string, std::string>{{"doc://a", "alpha\fbeta"}});
    LiteratureRecord record = make_record("a", "T", "Abstract.", 2020, 1);
    record.fulltext_locator = "doc://a";
    DocumentPages first = fx.store->fetch_document(record);
    CHECK(fx.fetcher->calls == 1);
    DocumentPages second = fx.store->fetch_document(record);
    CHECK(fx.fetcher->calls == 1);
    CHECK(first.pages == second.pages);

    // A fresh store over the same cache directory also avoids the backend.
    CorpusStore reopened(fx.dir + "/cache", fx.fetcher, *fx.gateway, fx.prompts, CorpusOptions{},
                         fx.log.logger());
    DocumentPages third = reopened.fetch_document(record);
    CHECK(fx.fetcher->calls == 1);
    CHECK(third.pages == first.pages);
    CHECK(third.fetched_from == FetchedFrom::fulltext);
}

TEST_CASE("cache layout: one txt per record plus a manifest") {
    Fixture fx(std::map<std::string, std::string>{{"doc://a", "alpha\fbeta"}});
    LiteratureRecord record = make_record("rec-77", "T", "Abstract.", 2020, 1);
    record.fulltext_locator = "doc://a";
    fx.store->fetch_document(record);
    CHECK(file_exists(fx.dir + "/cache/rec-77.txt"));
    json manifest = json::parse(read_text_file(fx.dir + "/cache/manifest.json"));
    CHECK(manifest.contains("rec-77"));
    CHECK(manifest["rec-77"]["fetched_from"] == "fulltext");
    CHECK(manifest["rec-77"]["pages"] == 2);
}

TEST_CASE("concurrent fetches of the same record coalesce") {
    Fixture fx(std::map<std::string, std::string>{{"doc://slow", "content page"}});
    LiteratureRecord record = make_record("s", "T", "Abstract.", 2020, 1);
    record.fulltext_locator = "doc://slow";
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) {
        threads.emplace_back([&]() { fx.store->fetch_document(record); });
    }
    for (auto& t : threads) t.join();
    CHECK(fx.fetcher->calls == 1);
}

TEST_CASE("preview on a single-page document skips the gateway") {
    Fixture fx;  // dispatch backend has no handler: any call would throw
    DocumentPages doc{"a", {"only page"}, FetchedFrom::abstract_fallback};
    CHECK(fx.store->preview_pages(doc, "focus", 4) == std::vector<int>{0});
}

TEST_CASE("preview validates, deduplicates and sorts returned indices") {
    Fixture fx;
    fx.chat->on("page-preview", [](const ChatRequest&, int) {
        return std::string("```json\n{\"pages\": [4, 2, 4, 2]}\n```");
    });
    DocumentPages doc{"a", {"p0", "p1", "p2", "p3", "p4"}, FetchedFrom::fulltext};
    CHECK(fx.store->preview_pages(doc, "focus", 4) == std::vector<int>{2, 4});
}

TEST_CASE("out-of-range preview indices are dropped with a warning") {
    Fixture fx;
    fx.chat->on("page-preview", [](const ChatRequest&, int) {
        return std::string("```json\n{\"pages\": [9]}\n```");
    });
    DocumentPages doc{"a", {"p0", "p1", "p2"}, FetchedFrom::fulltext};
    CHECK(fx.store->preview_pages(doc, "focus", 2).empty());
    CHECK(fx.log.saw_warning("out-of-range"));
}

TEST_CASE("preview respects the limit after validation") {
    Fixture fx;
    fx.chat->on("page-preview", [](const ChatRequest&, int) {
        return std::string("```json\n{\"pages\": [0, 1, 2, 3, 4]}\n```");
    });
    DocumentPages doc{"a", {"p0", "p1", "p2", "p3", "p4"}, FetchedFrom::fulltext};
    auto picked = fx.store->preview_pages(doc, "focus", 3);
    CHECK(picked == std::vector<int>{0, 1, 2});
    CHECK_THROWS_AS(fx.store->preview_pages(doc, "focus", 0), CorpusError);
}

TEST_CASE("local files and pdf conversion through the external command") {
    std::string dir = temp_dir("localdocs");
    write_text_file_atomic(dir + "/plain.txt", "local text body");
    write_text_file_atomic(dir + "/fake.pdf", "pdf-ish content to pass through");

    DefaultTextFetcher::Options options;
    options.base_dir = dir;
    options.pdf_converter = "cat {input}";
    DefaultTextFetcher fetcher(options, Logger([](LogLevel, const std::string&) {}));

    auto plain = fetcher.fetch("plain.txt");
    REQUIRE(plain.has_value());
    CHECK(*plain == "local text body");

    auto pdf = fetcher.fetch("fake.pdf");
    REQUIRE(pdf.has_value());
    CHECK(*pdf == "pdf-ish content to pass through");

    DefaultTextFetcher::Options no_converter;
    no_converter.base_dir = dir;
    DefaultTextFetcher bare(no_converter, Logger([](LogLevel, const std::string&) {}));
    CHECK_FALSE(bare.fetch("fake.pdf").has_value());
    CHECK_FALSE(bare.fetch("absent.txt").has_value());
}

}  // TEST_SUITE
