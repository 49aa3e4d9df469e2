#include "strata/web.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "strata/errors.hpp"
#include "strata/local_store.hpp"
#include "strata/net.hpp"
#include "strata/text.hpp"

namespace strata {

using nlohmann::json;

namespace {

// RAII slot on a counting semaphore.
class Slot {
public:
    explicit Slot(std::counting_semaphore<64>& sem) : sem_(sem) { sem_.acquire(); }
    ~Slot() { sem_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    std::counting_semaphore<64>& sem_;
};

std::ptrdiff_t clamp_slots(int n) {
    return std::clamp<std::ptrdiff_t>(n, 1, 64);
}

bool valid_hit(const WebHit& h) {
    return net::parse_url(h.url).has_value() && !(text::is_blank(h.title) && text::is_blank(h.snippet));
}

}  // namespace

std::string WebFixture::normalize_query(std::string_view q) {
    std::string s = text::join(text::whitespace_tokens(text::to_lower_ascii(q)), " ");
    while (!s.empty() && (s.back() == '?' || s.back() == '.' || s.back() == '!')) s.pop_back();
    return std::string(text::trim(s));
}

WebFixture WebFixture::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open web fixture: " + path.string());
    WebFixture fx;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        auto rec = json::parse(line, nullptr, false);
        auto where = path.string() + ":" + std::to_string(lineno);
        if (rec.is_discarded() || !rec.is_object()) throw ConfigError(where + ": malformed record");
        const std::string type = rec.value("type", "");
        if (type == "search") {
            SearchEntry entry;
            if (rec.contains("error")) entry.error = rec["error"].get<std::string>();
            for (const auto& h : rec.value("hits", json::array())) {
                entry.hits.push_back({h.value("url", ""), h.value("title", ""), h.value("snippet", "")});
            }
            fx.searches[normalize_query(rec.value("query", ""))] = std::move(entry);
        } else if (type == "page") {
            PageEntry entry;
            entry.status = rec.value("status", 200);
            entry.page.content_type = rec.value("content_type", "text/html");
            entry.page.body = rec.value("body", "");
            fx.pages[std::string(text::trim(rec.value("url", "")))] = std::move(entry);
        } else {
            throw ConfigError(where + ": unknown record type '" + type + "'");
        }
    }
    return fx;
}

std::vector<WebHit> FixtureSearchProvider::search(std::string_view query, int k) const {
    auto it = fixture_->searches.find(WebFixture::normalize_query(query));
    if (it == fixture_->searches.end()) return {};
    if (it->second.error) throw ProviderUnavailable(*it->second.error);
    std::vector<WebHit> out = it->second.hits;
    if (static_cast<int>(out.size()) > k) out.resize(static_cast<std::size_t>(std::max(k, 0)));
    return out;
}

Page FixturePageFetcher::fetch(const std::string& url) const {
    if (!net::parse_url(url)) throw FetchFailure("invalid URL: " + url);
    auto it = fixture_->pages.find(url);
    if (it == fixture_->pages.end()) throw FetchFailure("HTTP 404 for " + url);
    if (it->second.status != 200) throw FetchFailure("HTTP " + std::to_string(it->second.status) + " for " + url);
    return it->second.page;
}

// ---------------------------------------------------------------------------

SerperSearchProvider::SerperSearchProvider(std::string url, std::string api_key_env, LiveWebOptions options)
    : url_(std::move(url)),
      api_key_env_(std::move(api_key_env)),
      options_(options),
      slots_(clamp_slots(options.max_concurrent_requests)) {
    if (!net::parse_url(url_)) throw ConfigError("invalid search endpoint URL: " + url_);
}

std::vector<WebHit> SerperSearchProvider::search(std::string_view query, int k) const {
    auto key = net::env(api_key_env_);
    if (!key) throw ProviderUnavailable("search API key variable " + api_key_env_ + " is not set");
    json req{{"q", std::string(query)}, {"num", k}};
    net::HttpResponse res;
    {
        Slot slot(slots_);
        try {
            res = net::post_json(url_, req.dump(), {{"X-API-KEY", *key}}, options_.timeout);
        } catch (const Error& e) {
            throw ProviderUnavailable(std::string("search provider: ") + e.what());
        }
    }
    if (res.status != 200) throw ProviderUnavailable("search provider returned HTTP " + std::to_string(res.status));
    auto body = json::parse(res.body, nullptr, false);
    if (body.is_discarded()) throw ProviderUnavailable("search provider returned malformed JSON");
    std::vector<WebHit> out;
    for (const auto& item : body.value("organic", json::array())) {
        out.push_back({item.value("link", ""), item.value("title", ""), item.value("snippet", "")});
        if (static_cast<int>(out.size()) >= k) break;
    }
    return out;
}

HttpPageFetcher::HttpPageFetcher(LiveWebOptions options)
    : options_(options), slots_(clamp_slots(options.max_concurrent_requests)) {}

Page HttpPageFetcher::fetch(const std::string& url) const {
    if (!net::parse_url(url)) throw FetchFailure("invalid URL: " + url);
    net::HttpResponse res;
    {
        Slot slot(slots_);
        try {
            res = net::get(url, {{"User-Agent", "strata/1.0"}}, options_.timeout, options_.max_body_bytes);
        } catch (const Error& e) {
            throw FetchFailure(e.what());
        }
    }
    if (res.status < 200 || res.status >= 300) throw FetchFailure("HTTP " + std::to_string(res.status) + " for " + url);
    return {res.content_type, std::move(res.body)};
}

bool LanguageRoutedSearchProvider::routes_to_cjk(std::string_view query) const {
    return cjk_ && text::cjk_ratio(query) >= threshold_;
}

std::vector<WebHit> LanguageRoutedSearchProvider::search(std::string_view query, int k) const {
    return routes_to_cjk(query) ? cjk_->search(query, k) : fallback_->search(query, k);
}

// ---------------------------------------------------------------------------

std::vector<WebHit> web_search(std::string_view query, int k, const SearchProvider& provider) {
    if (text::is_blank(query)) throw EmptyQuery();
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    std::vector<WebHit> out;
    for (auto& h : provider.search(text::trim(query), k)) {
        if (!valid_hit(h)) continue;
        out.push_back(std::move(h));
        if (static_cast<int>(out.size()) >= k) break;
    }
    return out;
}

namespace {

bool is_block_tag(std::string_view name) {
    static constexpr std::string_view kBlocks[] = {
        "p",     "div",     "br",     "li",     "ul",      "ol",     "h1",     "h2",    "h3",   "h4",
        "h5",    "h6",      "tr",     "td",     "th",      "table",  "section", "article", "header", "footer",
        "nav",   "aside",   "main",   "blockquote", "pre", "hr",     "dl",     "dt",    "dd",   "title",
        "figure", "figcaption", "form", "address", "body", "html", "head", "caption", "tbody", "thead",
    };
    return std::find(std::begin(kBlocks), std::end(kBlocks), name) != std::end(kBlocks);
}

bool is_skipped_tag(std::string_view name) {
    return name == "script" || name == "style" || name == "noscript" || name == "template";
}

std::string decode_entities(std::string_view s) {
    static const std::map<std::string, char32_t, std::less<>> named{
        {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
        {"nbsp", ' '},     {"ndash", 0x2013}, {"mdash", 0x2014}, {"hellip", 0x2026}, {"copy", 0xA9},
        {"reg", 0xAE},     {"laquo", 0xAB},   {"raquo", 0xBB},   {"lsquo", 0x2018}, {"rsquo", 0x2019},
        {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"middot", 0xB7},  {"eacute", 0xE9},  {"uuml", 0xFC},
    };
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out.push_back(s[i]);
            continue;
        }
        std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');
            continue;
        }
        std::string_view ent = s.substr(i + 1, semi - i - 1);
        char32_t cp = 0;
        bool ok = false;
        if (!ent.empty() && ent[0] == '#') {
            try {
                std::size_t used = 0;
                std::string digits(ent.substr(ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X') ? 2 : 1));
                int base = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X')) ? 16 : 10;
                unsigned long v = std::stoul(digits, &used, base);
                if (used == digits.size() && v > 0 && v <= 0x10FFFF) {
                    cp = static_cast<char32_t>(v);
                    ok = true;
                }
            } catch (const std::exception&) {
            }
        } else if (auto it = named.find(ent); it != named.end()) {
            cp = it->second;
            ok = true;
        }
        if (!ok) {
            out.push_back('&');
            continue;
        }
        text::append_utf8(out, cp);
        i = semi;
    }
    return out;
}

}  // namespace

std::string html_to_text(std::string_view html) {
    if (html.find('<') == std::string_view::npos && html.find('&') == std::string_view::npos) return std::string(html);

    std::string raw;
    raw.reserve(html.size());
    std::size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            raw.push_back(html[i++]);
            continue;
        }
        if (html.substr(i, 4) == "<!--") {
            std::size_t end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        std::size_t j = i + 1;
        bool closing = j < html.size() && html[j] == '/';
        if (closing) ++j;
        std::size_t name_start = j;
        while (j < html.size() && (std::isalnum(static_cast<unsigned char>(html[j])) || html[j] == '-')) ++j;
        if (j == name_start && !(j < html.size() && (html[j] == '!' || html[j] == '?'))) {
            raw.push_back(html[i++]);  // a bare '<' in text
            continue;
        }
        std::string name = text::to_lower_ascii(html.substr(name_start, j - name_start));
        std::size_t gt = html.find('>', j);
        if (gt == std::string_view::npos) break;
        i = gt + 1;
        if (!closing && is_skipped_tag(name)) {
            std::string close = "</" + name;
            std::size_t k = i;
            while (true) {
                std::size_t at = html.find('<', k);
                if (at == std::string_view::npos) {
                    i = html.size();
                    break;
                }
                if (text::to_lower_ascii(html.substr(at, close.size())) == close) {
                    std::size_t end = html.find('>', at);
                    i = end == std::string_view::npos ? html.size() : end + 1;
                    break;
                }
                k = at + 1;
            }
            continue;
        }
        if (is_block_tag(name)) raw.push_back('\n');
    }

    std::string decoded = decode_entities(raw);
    std::string out;
    std::size_t pos = 0;
    while (pos <= decoded.size()) {
        std::size_t nl = decoded.find('\n', pos);
        std::string_view line = std::string_view(decoded).substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        line = text::trim(line);
        if (!line.empty()) {
            if (!out.empty()) out.push_back('\n');
            out.append(line);
        }
        if (nl == std::string::npos) break;
        pos = nl + 1;
    }
    return out;
}

BrowseRequest parse_browse_payload(std::string_view payload) {
    BrowseRequest req;
    std::size_t bar = payload.find('|');
    if (bar == std::string_view::npos) {
        req.url = std::string(text::trim(payload));
    } else {
        req.url = std::string(text::trim(payload.substr(0, bar)));
        req.question = std::string(text::trim(payload.substr(bar + 1)));
    }
    return req;
}

namespace {

bool looks_like_html(const Page& page) {
    if (page.content_type.find("html") != std::string::npos) return true;
    if (!page.content_type.empty()) return false;
    auto head = text::to_lower_ascii(std::string_view(page.body).substr(0, 1024));
    return head.find("<html") != std::string::npos || head.find("<body") != std::string::npos ||
           head.find("<p>") != std::string::npos || head.find("<!doctype") != std::string::npos;
}

}  // namespace

std::vector<PageExtract> browse_url(std::string_view url, std::string_view question, int k, const PageFetcher& fetcher,
                                    const EmbeddingProvider& embedder, int piece_tokens) {
    const std::string u(text::trim(url));
    if (!net::parse_url(u)) throw FetchFailure("invalid URL: " + u);
    if (text::is_blank(question)) throw EmptyQuery();
    if (k < 1 || piece_tokens < 1) throw std::invalid_argument("k and piece_tokens must be positive");

    Page page = fetcher.fetch(u);
    const std::string body = looks_like_html(page) ? html_to_text(page.body) : page.body;
    auto tokens = text::whitespace_tokens(body);

    std::vector<std::string> pieces;
    for (std::size_t b = 0; b < tokens.size(); b += static_cast<std::size_t>(piece_tokens)) {
        std::size_t e = std::min(tokens.size(), b + static_cast<std::size_t>(piece_tokens));
        pieces.push_back(text::join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(b),
                                                             tokens.begin() + static_cast<std::ptrdiff_t>(e)),
                                    " "));
    }
    if (pieces.empty()) return {};

    auto vectors = embedder.embed(pieces);
    auto q = embedder.embed_one(question);
    std::vector<PageExtract> out;
    for (const auto& [idx, score] : rank_by_similarity(q, vectors, static_cast<std::size_t>(k))) {
        out.push_back({u, pieces[idx], score});
    }
    return out;
}

}  // namespace strata
