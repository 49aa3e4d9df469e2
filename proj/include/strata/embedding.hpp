#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace strata {

using Vector = std::vector<float>;

// Dot product accumulated in double, clamped to [-1, 1]. Inputs are expected
// to be unit norm (or all-zero, which scores 0 against everything).
double similarity(std::span<const float> a, std::span<const float> b);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dimension() const = 0;
    virtual std::vector<Vector> embed(const std::vector<std::string>& texts) const = 0;
    // Configuration recorded in persisted stores.
    virtual nlohmann::json describe() const = 0;

    Vector embed_one(std::string_view text) const;
    double similarity(std::string_view a, std::string_view b) const;
};

/// Hashed bag-of-words embedder.
///
/// Tokens are lowercased ASCII alphanumeric runs (other non-CJK letters are
/// kept inside runs) plus one token per CJK character; a short English
/// stopword list is dropped and ASCII words lose a plural, -ed or -ing
/// suffix. Each token adds 1 to bucket fnv1a64(token) mod
/// dimension and the result is L2-normalized. Text with no tokens maps to the
/// zero vector.
class HashedEmbedder final : public EmbeddingProvider {
public:
    explicit HashedEmbedder(std::size_t dimension = 1024);

    std::size_t dimension() const override { return dimension_; }
    std::vector<Vector> embed(const std::vector<std::string>& texts) const override;
    nlohmann::json describe() const override;

    static std::vector<std::string> tokens(std::string_view text);

private:
    std::size_t dimension_;
};

struct HttpEmbedderOptions {
    std::string url;  // full endpoint, e.g. http://host:port/v1/embeddings
    std::string model;
    std::string api_key_env;
    std::size_t dimension = 0;  // 0: taken from the first response
    std::size_t batch_size = 64;
    std::chrono::milliseconds timeout{30000};
};

// OpenAI-style embeddings endpoint: POST {"model", "input": [...]},
// response {"data": [{"index", "embedding": [...]}]}. Vectors are
// re-normalized locally.
class HttpEmbedder final : public EmbeddingProvider {
public:
    explicit HttpEmbedder(HttpEmbedderOptions options);

    std::size_t dimension() const override;
    std::vector<Vector> embed(const std::vector<std::string>& texts) const override;
    nlohmann::json describe() const override;

private:
    HttpEmbedderOptions options_;
    mutable std::atomic<std::size_t> observed_dimension_{0};
};

void normalize(Vector& v);

}  // namespace strata
