#include "strata/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>
#include <unordered_set>

#include "strata/errors.hpp"
#include "strata/net.hpp"
#include "strata/text.hpp"

namespace strata {

double similarity(std::span<const float> a, std::span<const float> b) {
    const std::size_t n = std::min(a.size(), b.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return std::clamp(dot, -1.0, 1.0);
}

void normalize(Vector& v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (sq <= 0.0) return;
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
}

Vector EmbeddingProvider::embed_one(std::string_view text) const {
    auto out = embed({std::string(text)});
    return out.empty() ? Vector(dimension(), 0.0f) : std::move(out.front());
}

double EmbeddingProvider::similarity(std::string_view a, std::string_view b) const {
    auto vs = embed({std::string(a), std::string(b)});
    return strata::similarity(vs[0], vs[1]);
}

// ---------------------------------------------------------------------------

namespace {

const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words{
        "a",    "an",   "the",   "of",    "in",    "on",   "at",    "to",   "for",  "by",    "and",
        "or",   "is",   "was",   "are",   "were",  "be",   "been",  "it",   "its",  "this",  "that",
        "with", "as",   "from",  "who",   "what",  "which", "whom", "whose", "when", "where", "how",
        "did",  "do",   "does",  "his",   "her",   "their", "he",   "she",  "they", "has",   "had",
        "have", "also", "about", "into",  "than",  "then",  "there", "these", "those", "i",   "will",
    };
    return words;
}

bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Conservative inflection folding for ASCII words: plurals, -ed, -ing.
std::string stem(std::string w) {
    auto is_ascii = std::all_of(w.begin(), w.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
    if (!is_ascii || w.size() <= 3) return w;
    if ((ends_with(w, "ies") || ends_with(w, "ied")) && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    if (ends_with(w, "ing") && w.size() > 5) return w.substr(0, w.size() - 3);
    if (ends_with(w, "ed") && w.size() > 4) return w.substr(0, w.size() - 2);
    if (ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
        return w.substr(0, w.size() - 1);
    }
    return w;
}

bool is_word_cp(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    return !text::is_unicode_punct(cp) && cp != 0x3000 && cp != 0xFFFD;
}

}  // namespace

HashedEmbedder::HashedEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

std::vector<std::string> HashedEmbedder::tokens(std::string_view input) {
    std::vector<std::string> out;
    std::string lowered = text::to_lower_ascii(input);
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !stopwords().count(cur)) out.push_back(stem(cur));
        cur.clear();
    };
    std::size_t pos = 0;
    while (pos < lowered.size()) {
        std::size_t start = pos;
        char32_t cp = text::next_codepoint(lowered, pos);
        if (text::is_cjk(cp)) {
            flush();
            out.emplace_back(lowered.substr(start, pos - start));
        } else if (is_word_cp(cp)) {
            cur.append(lowered, start, pos - start);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::vector<Vector> HashedEmbedder::embed(const std::vector<std::string>& texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        Vector v(dimension_, 0.0f);
        for (const auto& tok : tokens(t)) v[text::fnv1a64(tok) % dimension_] += 1.0f;
        normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

nlohmann::json HashedEmbedder::describe() const {
    return {{"kind", "hashed"}, {"dimension", dimension_}};
}

// ---------------------------------------------------------------------------

HttpEmbedder::HttpEmbedder(HttpEmbedderOptions options) : options_(std::move(options)) {
    if (!net::parse_url(options_.url)) throw ConfigError("invalid embedding endpoint URL: " + options_.url);
    if (options_.batch_size == 0) throw ConfigError("embedding batch_size must be positive");
    observed_dimension_ = options_.dimension;
}

std::size_t HttpEmbedder::dimension() const {
    return observed_dimension_;
}

std::vector<Vector> HttpEmbedder::embed(const std::vector<std::string>& texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    net::Headers headers;
    if (auto key = net::env(options_.api_key_env)) headers.emplace_back("Authorization", "Bearer " + *key);

    for (std::size_t begin = 0; begin < texts.size(); begin += options_.batch_size) {
        const std::size_t end = std::min(texts.size(), begin + options_.batch_size);
        nlohmann::json req{{"model", options_.model},
                           {"input", std::vector<std::string>(texts.begin() + begin, texts.begin() + end)}};
        net::HttpResponse res;
        try {
            res = net::post_json(options_.url, req.dump(), headers, options_.timeout);
        } catch (const Error& e) {
            throw ProviderUnavailable(std::string("embedding endpoint: ") + e.what());
        }
        if (res.status != 200) {
            throw ProviderUnavailable("embedding endpoint returned HTTP " + std::to_string(res.status));
        }
        auto body = nlohmann::json::parse(res.body, nullptr, false);
        if (body.is_discarded() || !body.contains("data")) throw ProviderUnavailable("embedding endpoint: bad response");
        std::vector<Vector> batch(end - begin);
        for (const auto& item : body["data"]) {
            std::size_t idx = item.value("index", std::size_t{0});
            if (idx >= batch.size()) throw ProviderUnavailable("embedding endpoint: index out of range");
            batch[idx] = item.at("embedding").get<Vector>();
        }
        for (auto& v : batch) {
            if (v.empty()) throw ProviderUnavailable("embedding endpoint: missing vector");
            std::size_t expected = observed_dimension_;
            if (expected == 0) {
                observed_dimension_.compare_exchange_strong(expected, v.size());
                expected = observed_dimension_;
            }
            if (v.size() != expected) throw ProviderUnavailable("embedding endpoint: dimension mismatch");
            normalize(v);
            out.push_back(std::move(v));
        }
    }
    return out;
}

nlohmann::json HttpEmbedder::describe() const {
    // The key itself is never recorded, only the variable that holds it.
    return {{"kind", "http"},
            {"url", options_.url},
            {"model", options_.model},
            {"api_key_env", options_.api_key_env},
            {"dimension", dimension()}};
}

}  // namespace strata
