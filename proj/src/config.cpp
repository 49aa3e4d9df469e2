#include "strata/config.hpp"

#include <fstream>

#include "strata/errors.hpp"

namespace strata {

using nlohmann::json;

namespace {

const json& section(const json& doc, const char* name) {
    static const json empty = json::object();
    if (!doc.contains(name)) return empty;
    if (!doc[name].is_object()) throw ConfigError(std::string("config: '") + name + "' must be an object");
    return doc[name];
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) return;
    try {
        out = obj[key].get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for " + where + "." + key);
    }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out, const std::filesystem::path& base,
               const std::string& where) {
    std::string s;
    read(obj, key, s, where);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_absolute() ? p : base / p;
}

// Any key that looks like it holds a credential literal is refused.
void reject_secret_literals(const json& node, const std::string& where) {
    if (!node.is_object()) return;
    for (const auto& [key, value] : node.items()) {
        std::string k = key;
        for (auto& c : k) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const bool env_name = k.size() > 4 && k.compare(k.size() - 4, 4, "_env") == 0;
        auto ends = [&](std::string_view suffix) {
            return k.size() >= suffix.size() && k.compare(k.size() - suffix.size(), suffix.size(), suffix) == 0;
        };
        const bool secretish = k == "key" || k == "apikey" || k == "token" || k == "secret" || k == "password" ||
                               ends("_key") || ends("_token") || ends("_secret") || ends("_password");
        if (secretish && !env_name) {
            throw ConfigError("config: " + where + key +
                              " looks like a credential; give the environment variable name in '" + key + "_env'");
        }
        reject_secret_literals(value, where + key + ".");
    }
}

void require_exists(const std::filesystem::path& p, const std::string& what) {
    if (p.empty()) throw ConfigError("config: " + what + " is not set");
    if (!std::filesystem::exists(p)) throw ConfigError("config: " + what + " does not exist: " + p.string());
}

}  // namespace

void EngineConfig::validate() const {
    refiner.validate();
    if (rounds.local < 1 || rounds.web < 1 || rounds.planner < 1) throw ConfigError("config: round limits must be >= 1");
    for (int k : {retrieval.chunk_k, retrieval.graph_k, retrieval.adjacent_k, retrieval.web_k, retrieval.browse_k}) {
        if (k < 1) throw ConfigError("config: retrieval depths must be >= 1");
    }
    if (retrieval.piece_tokens < 1) throw ConfigError("config: retrieval.piece_tokens must be >= 1");
    if (chunk_tokens < 32) throw ConfigError("config: store.chunk_tokens must be >= 32");
    if (!(entity_threshold >= -1.0 && entity_threshold <= 1.0)) throw ConfigError("config: store.entity_threshold out of range");
    if (embedder.kind != "hashed" && embedder.kind != "http") throw ConfigError("config: embedder.kind must be hashed or http");
    if (embedder.kind == "hashed" && embedder.dimension == 0) throw ConfigError("config: embedder.dimension must be > 0");
    require_exists(prompts_dir, "prompts_dir");
    if (mock.generation) require_exists(fixtures.script, "fixtures.script");
    if (mock.web) require_exists(fixtures.web, "fixtures.web");
    if (!fixtures.corpus.empty()) require_exists(fixtures.corpus, "fixtures.corpus");
    if (!mock.generation && generation.url.empty()) throw ConfigError("config: generation.url is required unless mocked");
    if (!mock.embedding && embedder.kind == "http" && embedder.url.empty()) {
        throw ConfigError("config: embedder.url is required for the http embedder");
    }
}

EngineConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config: top level must be an object");

    EngineConfig c;
    const json& refiner = section(doc, "refiner");
    read(refiner, "alpha", c.refiner.alpha, "refiner");
    read(refiner, "beta", c.refiner.beta, "refiner");
    read(refiner, "min_per_round", c.refiner.min_per_round, "refiner");
    c.refiner.validate();

    if (!doc.contains("schema_version")) throw ConfigError("config: schema_version is required");
    if (doc["schema_version"] != kConfigSchemaVersion) {
        throw ConfigError("config: unsupported schema_version " + doc["schema_version"].dump());
    }
    reject_secret_literals(doc, "");

    if (doc.contains("mock")) {
        const json& m = doc["mock"];
        if (m.is_boolean()) {
            c.mock = {m.get<bool>(), m.get<bool>(), m.get<bool>()};
        } else if (m.is_object()) {
            read(m, "generation", c.mock.generation, "mock");
            read(m, "embedding", c.mock.embedding, "mock");
            read(m, "web", c.mock.web, "mock");
        } else {
            throw ConfigError("config: mock must be a boolean or an object");
        }
    }

    const json& store = section(doc, "store");
    read_path(store, "path", c.store_path, base_dir, "store");
    read(store, "chunk_tokens", c.chunk_tokens, "store");
    read(store, "entity_threshold", c.entity_threshold, "store");

    const json& emb = section(doc, "embedder");
    read(emb, "kind", c.embedder.kind, "embedder");
    read(emb, "dimension", c.embedder.dimension, "embedder");
    read(emb, "url", c.embedder.url, "embedder");
    read(emb, "model", c.embedder.model, "embedder");
    read(emb, "api_key_env", c.embedder.api_key_env, "embedder");
    read(emb, "timeout_ms", c.embedder.timeout_ms, "embedder");

    const json& gen = section(doc, "generation");
    read(gen, "url", c.generation.url, "generation");
    read(gen, "model", c.generation.model, "generation");
    read(gen, "api_key_env", c.generation.api_key_env, "generation");
    read(gen, "temperature", c.generation.temperature, "generation");
    read(gen, "top_p", c.generation.top_p, "generation");
    read(gen, "max_tokens", c.generation.max_tokens, "generation");
    read(gen, "timeout_ms", c.generation.timeout_ms, "generation");
    read(gen, "retries", c.generation.retries, "generation");

    const json& web = section(doc, "web");
    read(web, "search_url", c.web.search_url, "web");
    read(web, "api_key_env", c.web.api_key_env, "web");
    read(web, "cjk_search_url", c.web.cjk_search_url, "web");
    read(web, "cjk_api_key_env", c.web.cjk_api_key_env, "web");
    read(web, "timeout_ms", c.web.timeout_ms, "web");
    read(web, "max_concurrent_requests", c.web.max_concurrent_requests, "web");
    read(web, "max_page_bytes", c.web.max_page_bytes, "web");

    const json& rounds = section(doc, "round_limits");
    read(rounds, "local", c.rounds.local, "round_limits");
    read(rounds, "web", c.rounds.web, "round_limits");
    read(rounds, "planner", c.rounds.planner, "round_limits");

    const json& ret = section(doc, "retrieval");
    read(ret, "chunk_k", c.retrieval.chunk_k, "retrieval");
    read(ret, "graph_k", c.retrieval.graph_k, "retrieval");
    read(ret, "adjacent_k", c.retrieval.adjacent_k, "retrieval");
    read(ret, "web_k", c.retrieval.web_k, "retrieval");
    read(ret, "browse_k", c.retrieval.browse_k, "retrieval");
    read(ret, "piece_tokens", c.retrieval.piece_tokens, "retrieval");

    read_path(doc, "prompts_dir", c.prompts_dir, base_dir, "");
    const json& fx = section(doc, "fixtures");
    read_path(fx, "script", c.fixtures.script, base_dir, "fixtures");
    read_path(fx, "web", c.fixtures.web, base_dir, "fixtures");
    read_path(fx, "corpus", c.fixtures.corpus, base_dir, "fixtures");

    c.validate();
    return c;
}

EngineConfig load_config(const std::filesystem::path& path, bool force_mock) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    if (force_mock && doc.is_object()) doc["mock"] = true;
    return parse_config(doc, std::filesystem::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------

std::shared_ptr<const EmbeddingProvider> make_embedder(const EngineConfig& config) {
    if (config.mock.embedding || config.embedder.kind == "hashed") {
        return std::make_shared<HashedEmbedder>(config.embedder.kind == "hashed" ? config.embedder.dimension : 1024);
    }
    HttpEmbedderOptions o;
    o.url = config.embedder.url;
    o.model = config.embedder.model;
    o.api_key_env = config.embedder.api_key_env;
    o.dimension = config.embedder.dimension;
    o.timeout = std::chrono::milliseconds(config.embedder.timeout_ms);
    return std::make_shared<HttpEmbedder>(o);
}

std::shared_ptr<GenerationClient> make_generation_client(const EngineConfig& config, const std::string& agent) {
    if (config.mock.generation) {
        auto all = load_script_file(config.fixtures.script.string());
        auto it = all.find(agent);
        return std::make_shared<ScriptedClient>(it == all.end() ? ScriptedClient::Scripts{} : it->second);
    }
    HttpGenerationOptions o;
    o.url = config.generation.url;
    o.model = config.generation.model;
    o.api_key_env = config.generation.api_key_env;
    o.temperature = config.generation.temperature;
    o.top_p = config.generation.top_p;
    o.max_tokens = config.generation.max_tokens;
    o.timeout = std::chrono::milliseconds(config.generation.timeout_ms);
    o.retries = config.generation.retries;
    return std::make_shared<HttpGenerationClient>(o);
}

WebBackends make_web(const EngineConfig& config) {
    if (config.mock.web) {
        auto fixture = std::make_shared<const WebFixture>(WebFixture::load(config.fixtures.web));
        return {std::make_shared<FixtureSearchProvider>(fixture), std::make_shared<FixturePageFetcher>(fixture)};
    }
    LiveWebOptions o;
    o.timeout = std::chrono::milliseconds(config.web.timeout_ms);
    o.max_concurrent_requests = config.web.max_concurrent_requests;
    o.max_body_bytes = config.web.max_page_bytes;
    std::shared_ptr<const SearchProvider> search =
        std::make_shared<SerperSearchProvider>(config.web.search_url, config.web.api_key_env, o);
    if (!config.web.cjk_search_url.empty()) {
        auto cjk = std::make_shared<SerperSearchProvider>(config.web.cjk_search_url, config.web.cjk_api_key_env, o);
        search = std::make_shared<LanguageRoutedSearchProvider>(search, cjk);
    }
    return {search, std::make_shared<HttpPageFetcher>(o)};
}

std::shared_ptr<const LocalStore> open_store(const EngineConfig& config, std::shared_ptr<const EmbeddingProvider> embedder) {
    StoreOptions opts{config.entity_threshold};
    if (!config.store_path.empty() && std::filesystem::exists(config.store_path / "manifest.json")) {
        return std::make_shared<LocalStore>(LocalStore::load(config.store_path, embedder, opts));
    }
    if (config.fixtures.corpus.empty()) {
        throw ConfigError("no local store at '" + config.store_path.string() + "' and no fixtures.corpus to build one");
    }
    ChunkCorpus corpus = ingest_chunks(read_documents_jsonl(config.fixtures.corpus), config.chunk_tokens, embedder);
    RuleBasedExtractor extractor;
    KnowledgeGraph graph = build_graph(corpus, extractor);
    return std::make_shared<LocalStore>(std::move(corpus), std::move(graph), opts);
}

Engine build_engine(const EngineConfig& config) {
    config.validate();
    Engine e;
    e.embedder = make_embedder(config);
    e.store = open_store(config, e.embedder);
    e.web = make_web(config);

    auto local_tools = std::make_shared<ToolRegistry>();
    register_local_tools(*local_tools, e.store, config.retrieval);
    auto web_tools = std::make_shared<ToolRegistry>();
    register_web_tools(*web_tools, e.web.search, e.web.fetcher, e.embedder, config.retrieval);

    PlannerDeps deps;
    deps.local = {AgentConfig::make("local", load_prompt(config.prompts_dir, "local"), tools::local_toolset(),
                                    config.rounds.local),
                  local_tools, make_generation_client(config, "local")};
    deps.web = {AgentConfig::make("web", load_prompt(config.prompts_dir, "web"), tools::web_toolset(), config.rounds.web),
                web_tools, make_generation_client(config, "web")};
    deps.planner = AgentConfig::make("planner", load_prompt(config.prompts_dir, "planner"), tools::planner_toolset(),
                                     config.rounds.planner);
    deps.planner_client = make_generation_client(config, "planner");
    deps.refiner = config.refiner;
    deps.embedder = e.embedder;
    e.planner = std::make_unique<Planner>(std::move(deps));
    return e;
}

}  // namespace strata
