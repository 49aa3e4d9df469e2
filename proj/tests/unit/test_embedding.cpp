#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "local_server.hpp"
#include "strata/embedding.hpp"
#include "strata/errors.hpp"

using namespace strata;

namespace {

double norm(const Vector& v) {
    double s = 0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("hashed embedder tokens") {
    auto t = HashedEmbedder::tokens("The Author of KAPALKUNDALA, 1866!");
    CHECK(t == std::vector<std::string>{"author", "kapalkundala", "1866"});
    auto c = HashedEmbedder::tokens("作者是谁 abc");
    CHECK(c == std::vector<std::string>{"作", "者", "是", "谁", "abc"});
    CHECK(HashedEmbedder::tokens("the of and").empty());
    CHECK(HashedEmbedder::tokens("rivers carried recorded measuring glass bus") ==
          std::vector<std::string>{"river", "carry", "record", "measur", "glass", "bus"});
}

TEST_CASE("hashed vectors are unit norm or zero") {
    HashedEmbedder e(64);
    auto vs = e.embed({"alpha beta", "", "the"});
    REQUIRE(vs.size() == 3);
    CHECK(vs[0].size() == 64);
    CHECK(norm(vs[0]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(norm(vs[1]) == 0.0);
    CHECK(norm(vs[2]) == 0.0);
    CHECK(e.describe()["kind"] == "hashed");
    CHECK(e.describe()["dimension"] == 64);
    CHECK_THROWS_AS(HashedEmbedder(0), std::invalid_argument);
}

TEST_CASE("hashed embedding is deterministic and lexical") {
    HashedEmbedder e;
    CHECK(e.embed_one("river delta") == e.embed_one("river delta"));
    CHECK(e.similarity("river delta", "delta river") == doctest::Approx(1.0));
    CHECK(e.similarity("river delta", "river") > e.similarity("river delta", "mountain"));
    CHECK(e.similarity("", "anything") == 0.0);
}

TEST_CASE("similarity clamps to [-1, 1]") {
    Vector a{2.0f, 0.0f}, b{2.0f, 0.0f}, c{-2.0f, 0.0f};
    CHECK(similarity(a, b) == 1.0);
    CHECK(similarity(a, c) == -1.0);
    Vector v{3.0f, 4.0f};
    normalize(v);
    CHECK(v[0] == doctest::Approx(0.6));
}

TEST_CASE("http embedder talks to an embeddings endpoint") {
    testing::LocalServer srv;
    std::string seen_auth;
    int calls = 0;
    srv.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        seen_auth = req.get_header_value("Authorization");
        auto body = nlohmann::json::parse(req.body);
        nlohmann::json data = nlohmann::json::array();
        const auto& input = body["input"];
        // Reverse order on purpose: the client must place vectors by index.
        for (int i = static_cast<int>(input.size()) - 1; i >= 0; --i) {
            float len = static_cast<float>(input[i].get<std::string>().size());
            data.push_back({{"index", i}, {"embedding", {len, 0.0f, 1.0f}}});
        }
        res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
    });
    srv.start();

    ::setenv("STRATA_TEST_EMBED_KEY", "sekrit-value", 1);
    HttpEmbedderOptions o;
    o.url = srv.url("/v1/embeddings");
    o.model = "m";
    o.api_key_env = "STRATA_TEST_EMBED_KEY";
    o.batch_size = 2;
    HttpEmbedder e(o);
    auto vs = e.embed({"a", "bbb", "cc"});
    REQUIRE(vs.size() == 3);
    CHECK(calls == 2);
    CHECK(seen_auth == "Bearer sekrit-value");
    CHECK(e.dimension() == 3);
    CHECK(norm(vs[1]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(vs[1][0] > vs[0][0]);
    CHECK(e.describe().dump().find("sekrit-value") == std::string::npos);
    CHECK(e.describe()["api_key_env"] == "STRATA_TEST_EMBED_KEY");
    ::unsetenv("STRATA_TEST_EMBED_KEY");
}

TEST_CASE("http embedder failures surface as ProviderUnavailable") {
    testing::LocalServer srv;
    srv.server().Post("/bad", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
    });
    srv.server().Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "text/plain");
    });
    srv.start();
    HttpEmbedderOptions o;
    o.url = srv.url("/bad");
    CHECK_THROWS_AS(HttpEmbedder(o).embed({"x"}), ProviderUnavailable);
    o.url = srv.url("/garbage");
    CHECK_THROWS_AS(HttpEmbedder(o).embed({"x"}), ProviderUnavailable);
    o.url = "not a url";
    CHECK_THROWS_AS(HttpEmbedder{o}, ConfigError);
}
