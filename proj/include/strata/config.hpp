#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "strata/agent.hpp"
#include "strata/embedding.hpp"
#include "strata/generation.hpp"
#include "strata/local_store.hpp"
#include "strata/planner.hpp"
#include "strata/refiner.hpp"
#include "strata/web.hpp"

namespace strata {

inline constexpr int kConfigSchemaVersion = 1;

// Which externals are replaced by fixtures.
struct MockFlags {
    bool generation = false;
    bool embedding = false;
    bool web = false;

    bool any() const { return generation || embedding || web; }
};

struct EmbedderSettings {
    std::string kind = "hashed";  // "hashed" or "http"
    std::size_t dimension = 1024;
    std::string url;
    std::string model;
    std::string api_key_env;
    int timeout_ms = 30000;
};

struct GenerationSettings {
    std::string url;
    std::string model;
    std::string api_key_env;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    int timeout_ms = 120000;
    int retries = 2;
};

struct WebSettings {
    std::string search_url = "https://google.serper.dev/search";
    std::string api_key_env = "SERPER_API_KEY";
    // Optional second provider for queries that are mostly CJK.
    std::string cjk_search_url;
    std::string cjk_api_key_env;
    int timeout_ms = 15000;
    int max_concurrent_requests = 4;
    std::size_t max_page_bytes = 2 * 1024 * 1024;
};

struct RoundLimits {
    int local = 8;
    int web = 8;
    int planner = 4;
};

struct FixturePaths {
    std::filesystem::path script;  // scripted generations
    std::filesystem::path web;     // WebFixture JSONL
    std::filesystem::path corpus;  // documents JSONL, used when no store exists
};

/// Engine configuration, a JSON document with "schema_version": 1.
///
/// Credentials never appear in the file: only the names of the environment
/// variables that hold them. Relative paths resolve against the config
/// file's directory.
struct EngineConfig {
    MockFlags mock;
    std::filesystem::path store_path;
    int chunk_tokens = 128;
    double entity_threshold = 0.5;
    EmbedderSettings embedder;
    GenerationSettings generation;
    WebSettings web;
    RefinerConfig refiner;
    RoundLimits rounds;
    RetrievalDepth retrieval;
    std::filesystem::path prompts_dir;
    FixturePaths fixtures;

    // Range checks and path existence; refiner ranges first.
    void validate() const;
};

// Refiner ranges are checked before anything else is looked at.
EngineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
// `force_mock` switches every external to its fixture, as --mock does.
EngineConfig load_config(const std::filesystem::path& path, bool force_mock = false);

std::shared_ptr<const EmbeddingProvider> make_embedder(const EngineConfig& config);
// One client per agent name ("local", "web", "planner").
std::shared_ptr<GenerationClient> make_generation_client(const EngineConfig& config, const std::string& agent);

struct WebBackends {
    std::shared_ptr<const SearchProvider> search;
    std::shared_ptr<const PageFetcher> fetcher;
};
WebBackends make_web(const EngineConfig& config);

// Loads the persisted store, or builds one in memory from the fixture
// corpus when no store exists.
std::shared_ptr<const LocalStore> open_store(const EngineConfig& config, std::shared_ptr<const EmbeddingProvider> embedder);

struct Engine {
    std::shared_ptr<const EmbeddingProvider> embedder;
    std::shared_ptr<const LocalStore> store;
    WebBackends web;
    std::unique_ptr<Planner> planner;
};

Engine build_engine(const EngineConfig& config);

}  // namespace strata
