#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "strata/embedding.hpp"

namespace strata {

struct WebHit {
    std::string url;
    std::string title;
    std::string snippet;

    bool operator==(const WebHit&) const = default;
};

struct PageExtract {
    std::string url;
    std::string piece;
    double score = 0.0;
};

struct Page {
    std::string content_type;
    std::string body;
};

// Implementations must be safe to call concurrently.
class SearchProvider {
public:
    virtual ~SearchProvider() = default;
    // Throws ProviderUnavailable on network/auth failures.
    virtual std::vector<WebHit> search(std::string_view query, int k) const = 0;
};

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    // Throws FetchFailure on bad URLs and HTTP errors.
    virtual Page fetch(const std::string& url) const = 0;
};

/// Offline web: canned search results and page bodies.
///
/// JSONL records:
///   {"type":"search","query":q,"hits":[{"url","title","snippet"}...]}
///   {"type":"search","query":q,"error":"..."}      (ProviderUnavailable)
///   {"type":"page","url":u,"body":b,"content_type":"text/html"}
///   {"type":"page","url":u,"status":404}
/// Queries are matched after normalize_query().
class WebFixture {
public:
    static WebFixture load(const std::filesystem::path& path);
    static std::string normalize_query(std::string_view q);

    struct SearchEntry {
        std::vector<WebHit> hits;
        std::optional<std::string> error;
    };
    struct PageEntry {
        Page page;
        int status = 200;
    };

    std::map<std::string, SearchEntry> searches;
    std::map<std::string, PageEntry> pages;
};

class FixtureSearchProvider final : public SearchProvider {
public:
    explicit FixtureSearchProvider(std::shared_ptr<const WebFixture> fixture) : fixture_(std::move(fixture)) {}
    std::vector<WebHit> search(std::string_view query, int k) const override;

private:
    std::shared_ptr<const WebFixture> fixture_;
};

class FixturePageFetcher final : public PageFetcher {
public:
    explicit FixturePageFetcher(std::shared_ptr<const WebFixture> fixture) : fixture_(std::move(fixture)) {}
    Page fetch(const std::string& url) const override;

private:
    std::shared_ptr<const WebFixture> fixture_;
};

struct LiveWebOptions {
    std::chrono::milliseconds timeout{15000};
    int max_concurrent_requests = 4;
    std::size_t max_body_bytes = 2 * 1024 * 1024;
};

/// Serper-style search API.
///   request:  POST url, header "X-API-KEY: $<api_key_env>", body {"q": query, "num": k}
///   response: {"organic": [{"link", "title", "snippet"}...]}
class SerperSearchProvider final : public SearchProvider {
public:
    SerperSearchProvider(std::string url, std::string api_key_env, LiveWebOptions options = {});
    std::vector<WebHit> search(std::string_view query, int k) const override;

private:
    std::string url_;
    std::string api_key_env_;
    LiveWebOptions options_;
    mutable std::counting_semaphore<64> slots_;
};

class HttpPageFetcher final : public PageFetcher {
public:
    explicit HttpPageFetcher(LiveWebOptions options = {});
    Page fetch(const std::string& url) const override;

private:
    LiveWebOptions options_;
    mutable std::counting_semaphore<64> slots_;
};

// Sends queries whose CJK share is >= threshold to `cjk`, others to `fallback`.
class LanguageRoutedSearchProvider final : public SearchProvider {
public:
    LanguageRoutedSearchProvider(std::shared_ptr<const SearchProvider> fallback, std::shared_ptr<const SearchProvider> cjk,
                                 double threshold = 0.3)
        : fallback_(std::move(fallback)), cjk_(std::move(cjk)), threshold_(threshold) {}
    std::vector<WebHit> search(std::string_view query, int k) const override;
    bool routes_to_cjk(std::string_view query) const;

private:
    std::shared_ptr<const SearchProvider> fallback_;
    std::shared_ptr<const SearchProvider> cjk_;
    double threshold_;
};

// Validates the query (EmptyQuery), caps output at k, drops hits with an
// invalid URL or with neither title nor snippet.
std::vector<WebHit> web_search(std::string_view query, int k, const SearchProvider& provider);

// Drops script/style/noscript/template content and comments, turns block
// elements into line breaks, decodes entities, trims lines and drops empty
// ones. Input without '<' or '&' is returned unchanged.
std::string html_to_text(std::string_view html);

struct BrowseRequest {
    std::string url;
    std::string question;
};

// "URL | question", split at the first '|'; both sides trimmed.
BrowseRequest parse_browse_payload(std::string_view payload);

// Fetches, strips markup when the page is HTML, chunks into
// `piece_tokens`-token pieces and returns the top-k pieces by similarity to
// the question, ties by piece order.
std::vector<PageExtract> browse_url(std::string_view url, std::string_view question, int k, const PageFetcher& fetcher,
                                    const EmbeddingProvider& embedder, int piece_tokens = 200);

}  // namespace strata
