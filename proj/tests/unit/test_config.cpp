#include <doctest.h>

#include "helpers.hpp"
#include "strata/config.hpp"
#include "strata/errors.hpp"

using namespace strata;

namespace {

nlohmann::json kapal_doc() {
    return nlohmann::json::parse(testing::slurp(testing::fixtures() / "kapalkundala/config.json"));
}

std::filesystem::path kapal_dir() {
    return testing::fixtures() / "kapalkundala";
}

std::string error_of(const nlohmann::json& doc) {
    try {
        parse_config(doc, kapal_dir());
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("fixture config parses and resolves paths") {
    auto c = parse_config(kapal_doc(), kapal_dir());
    CHECK(c.mock.generation);
    CHECK(c.mock.web);
    CHECK(c.refiner.alpha == 30.0);
    CHECK(c.rounds.planner == 4);
    CHECK(c.retrieval.browse_k == 3);
    CHECK(c.fixtures.script == kapal_dir() / "script.json");
    CHECK(std::filesystem::exists(c.prompts_dir / "planner.txt"));
}

TEST_CASE("refiner ranges are checked first") {
    auto doc = kapal_doc();
    doc["refiner"]["alpha"] = 0;
    doc["schema_version"] = 7;
    CHECK(error_of(doc).find("alpha") != std::string::npos);
    doc = kapal_doc();
    doc["refiner"]["beta"] = 150;
    doc.erase("schema_version");
    CHECK(error_of(doc).find("beta") != std::string::npos);
}

TEST_CASE("schema version is required") {
    auto doc = kapal_doc();
    doc["schema_version"] = 2;
    CHECK(error_of(doc).find("schema_version") != std::string::npos);
    doc.erase("schema_version");
    CHECK(error_of(doc).find("schema_version") != std::string::npos);
}

TEST_CASE("secret literals are refused") {
    auto doc = kapal_doc();
    doc["web"]["api_key"] = "abc123";
    auto err = error_of(doc);
    CHECK(err.find("api_key") != std::string::npos);
    CHECK(err.find("abc123") == std::string::npos);
    doc = kapal_doc();
    doc["generation"]["token"] = "t";
    CHECK_FALSE(error_of(doc).empty());
    doc = kapal_doc();
    doc["generation"]["api_key_env"] = "OTHER_VAR";
    CHECK(error_of(doc).empty());
}

TEST_CASE("bad values and missing paths") {
    auto doc = kapal_doc();
    doc["round_limits"]["planner"] = 0;
    CHECK_FALSE(error_of(doc).empty());
    doc = kapal_doc();
    doc["fixtures"]["script"] = "nope.json";
    CHECK(error_of(doc).find("nope.json") != std::string::npos);
    doc = kapal_doc();
    doc["prompts_dir"] = "missing_prompts";
    CHECK_FALSE(error_of(doc).empty());
    doc = kapal_doc();
    doc["store"]["chunk_tokens"] = "many";
    CHECK_FALSE(error_of(doc).empty());
    doc = kapal_doc();
    doc["mock"] = "yes";
    CHECK_FALSE(error_of(doc).empty());
    CHECK_THROWS_AS(load_config(kapal_dir() / "missing.json"), ConfigError);
}

TEST_CASE("per-subsystem mock flags and the force_mock override") {
    testing::TempDir dir;
    auto doc = kapal_doc();
    doc["mock"] = {{"generation", true}, {"web", false}, {"embedding", true}};
    doc["prompts_dir"] = (testing::prompts()).string();
    for (const char* k : {"script", "web", "corpus"}) {
        doc["fixtures"][k] = (kapal_dir() / doc["fixtures"][k].get<std::string>()).string();
    }
    testing::spit(dir / "c.json", doc.dump());
    auto partial = load_config(dir / "c.json");
    CHECK(partial.mock.generation);
    CHECK_FALSE(partial.mock.web);
    auto forced = load_config(dir / "c.json", true);
    CHECK(forced.mock.web);
    CHECK(forced.mock.embedding);
}

TEST_CASE("factories honour mock mode") {
    auto c = load_config(kapal_dir() / "config.json");
    CHECK(make_embedder(c)->describe()["kind"] == "hashed");
    auto client = make_generation_client(c, "local");
    REQUIRE(client);
    CHECK(dynamic_cast<ScriptedClient*>(client.get()) != nullptr);
    auto web = make_web(c);
    CHECK(web.search);
    CHECK(web.fetcher);
    auto store = open_store(c, make_embedder(c));
    CHECK(store->corpus().size() > 0);
    Engine e = build_engine(c);
    CHECK(e.planner);
    CHECK(e.planner->deps().planner.round_limit == 4);
    CHECK(e.planner->deps().local.config.toolset == tools::local_toolset());
}

TEST_CASE("live settings never need a key in the file") {
    auto doc = kapal_doc();
    doc["mock"] = false;
    auto c = parse_config(doc, kapal_dir());
    CHECK_FALSE(c.mock.any());
    CHECK(c.web.api_key_env == "SERPER_API_KEY");
    auto client = make_generation_client(c, "planner");
    CHECK(dynamic_cast<HttpGenerationClient*>(client.get()) != nullptr);
}
