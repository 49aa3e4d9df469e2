#include "strata/net.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "strata/errors.hpp"

namespace strata::net {

std::string UrlParts::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

std::optional<UrlParts> parse_url(std::string_view url) {
    static const std::regex re(R"(^(https?)://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(?::([0-9]{1,5}))?([/?#][^\s]*)?$)",
                               std::regex::ECMAScript);
    std::smatch m;
    std::string s(url);
    if (!std::regex_match(s, m, re)) return std::nullopt;
    UrlParts parts;
    parts.scheme = m[1].str();
    parts.host = m[2].str();
    if (parts.host.empty() || parts.host.front() == '.' || parts.host.back() == '.') return std::nullopt;
    parts.port = m[3].matched ? std::stoi(m[3].str()) : (parts.scheme == "https" ? 443 : 80);
    if (parts.port <= 0 || parts.port > 65535) return std::nullopt;
    parts.path = m[4].matched ? m[4].str() : "/";
    if (parts.path.front() != '/') parts.path.insert(parts.path.begin(), '/');
    if (auto hash = parts.path.find('#'); hash != std::string::npos) parts.path.erase(hash);
    return parts;
}

namespace {

httplib::Client make_client(const UrlParts& u, std::chrono::milliseconds timeout) {
    httplib::Client cli(u.origin());
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    cli.set_follow_location(true);
    return cli;
}

httplib::Headers to_headers(const Headers& headers) {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    return h;
}

}  // namespace

HttpResponse post_json(const std::string& url, const std::string& body, const Headers& headers,
                       std::chrono::milliseconds timeout) {
    auto u = parse_url(url);
    if (!u) throw Error("invalid URL: " + url);
    auto cli = make_client(*u, timeout);
    auto res = cli.Post(u->path, to_headers(headers), body, "application/json");
    if (!res) throw Error("request to " + u->origin() + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->get_header_value("Content-Type"), res->body};
}

HttpResponse get(const std::string& url, const Headers& headers, std::chrono::milliseconds timeout,
                 std::size_t max_body_bytes) {
    auto u = parse_url(url);
    if (!u) throw Error("invalid URL: " + url);
    auto cli = make_client(*u, timeout);
    std::string body;
    bool too_large = false;
    auto res = cli.Get(u->path, to_headers(headers), [&](const char* data, std::size_t len) {
        if (body.size() + len > max_body_bytes) {
            too_large = true;
            return false;
        }
        body.append(data, len);
        return true;
    });
    if (too_large) throw Error("response from " + url + " exceeds " + std::to_string(max_body_bytes) + " bytes");
    if (!res) throw Error("request to " + u->origin() + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->get_header_value("Content-Type"), std::move(body)};
}

std::optional<std::string> env(const std::string& name) {
    if (name.empty()) return std::nullopt;
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

}  // namespace strata::net
