#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace strata::net {

struct UrlParts {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string path;  // includes query string, always starts with '/'

    std::string origin() const;
};

// Accepts absolute http(s) URLs only.
std::optional<UrlParts> parse_url(std::string_view url);

struct HttpResponse {
    int status = 0;
    std::string content_type;
    std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

// Transport failures (connect, timeout, TLS) throw the given error type's
// base, strata::Error; HTTP error statuses are returned, not thrown.
HttpResponse post_json(const std::string& url, const std::string& body, const Headers& headers,
                       std::chrono::milliseconds timeout);
HttpResponse get(const std::string& url, const Headers& headers, std::chrono::milliseconds timeout,
                 std::size_t max_body_bytes);

// Reads an environment variable; empty optional when unset or empty.
std::optional<std::string> env(const std::string& name);

}  // namespace strata::net
