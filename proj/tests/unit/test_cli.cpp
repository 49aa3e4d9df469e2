#include <doctest.h>

#include "helpers.hpp"
#include "strata/eval.hpp"
#include "strata/planner.hpp"

using namespace strata;

namespace {

std::string q(const std::filesystem::path& p) {
    return "'" + p.string() + "'";
}

testing::CommandResult cli(const std::string& args) {
    return testing::run(std::string(STRATA_CLI_PATH) + " " + args + " 2>&1");
}

std::string kapal_config() {
    return q(testing::fixtures() / "kapalkundala/config.json");
}

}  // namespace

TEST_CASE("ingest writes a store and refuses to overwrite it") {
    testing::TempDir dir;
    auto corpus = q(testing::fixtures() / "kapalkundala/corpus.jsonl");
    auto r = cli("ingest " + corpus + " --store " + q(dir / "store"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("chunks: 12") != std::string::npos);
    CHECK(r.out.find("triples: ") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "store/manifest.json"));

    auto again = cli("ingest " + corpus + " --store " + q(dir / "store"));
    CHECK(again.exit_code == 1);
    CHECK(again.out.find("--force") != std::string::npos);
    CHECK(cli("ingest " + corpus + " --store " + q(dir / "store") + " --force").exit_code == 0);

    auto graph = cli("build-graph --store " + q(dir / "store"));
    CHECK(graph.exit_code == 0);
    CHECK(graph.out.find("chunks: 12") != std::string::npos);

    auto missing = cli("ingest " + q(dir / "nope.jsonl") + " --store " + q(dir / "s2"));
    CHECK(missing.exit_code == 1);
    CHECK(missing.out.find("nope.jsonl") != std::string::npos);
}

TEST_CASE("ask answers in mock mode and writes a trace") {
    testing::TempDir dir;
    auto r = cli("ask 'Who is the sibling of the author of Kapalkundala?' --config " + kapal_config() +
                 " --trace " + q(dir / "trace.jsonl"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.rfind("Sanjib Chandra Chattopadhyay.\n", 0) == 0);
    CHECK(r.out.find("searches: local=3 web=2 browse=2") != std::string::npos);
    PlannerTrace t = load_trace(dir / "trace.jsonl");
    auto c = count_searches(t);
    CHECK(c == SearchCounts{3, 2, 2});
    CHECK(t.children.size() == 4);
}

TEST_CASE("ask without an answer exits 2") {
    auto r = cli("ask 'An unscripted question' --mock --config " + kapal_config());
    CHECK(r.exit_code == 2);
    CHECK(r.out.rfind("NO ANSWER\n", 0) == 0);
    CHECK(cli("ask 'q'").exit_code == 1);
}

TEST_CASE("score prints the reward breakdown") {
    auto file = q(testing::fixtures() / "trajectories/local.txt");
    auto r = cli("score " + file + " --gold 'Sanjib Chandra Chattopadhyay'");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("format: valid") != std::string::npos);
    CHECK(r.out.find("prediction: Latchmiudayi") != std::string::npos);
    CHECK(r.out.find("tools: 2/3") != std::string::npos);
    CHECK(r.out.find("em: 0") != std::string::npos);
    CHECK(r.out.find("reward: 0.066667") != std::string::npos);
    auto planner = cli("score " + q(testing::fixtures() / "trajectories/planner.txt") +
                       " --toolset planner --gold 'Sanjib Chandra Chattopadhyay'");
    CHECK(planner.out.find("reward: 1.000000") != std::string::npos);
    auto strict = cli("score " + file + " --strict --gold x");
    CHECK(strict.out.find("format: valid") != std::string::npos);

    testing::TempDir dir;
    testing::spit(dir / "bad.txt", "<think>never closed");
    CHECK(cli("score " + q(dir / "bad.txt") + " --gold x").exit_code == 1);
}

TEST_CASE("refine prints evidence lines") {
    testing::TempDir dir;
    testing::spit(dir / "t.txt", "<think>a</think><chunk_search>q</chunk_search><result>\n"
                                 "Local Chunk Corpus: first passage\n\nLocal Chunk Corpus: second passage\n"
                                 "</result><answer>x</answer>");
    auto all = cli("refine " + q(dir / "t.txt") + " --alpha 100 --beta 100");
    REQUIRE(all.exit_code == 0);
    CHECK(all.out == "Local Chunk Corpus: first passage\n\nLocal Chunk Corpus: second passage\n");
    auto none = cli("refine " + q(testing::fixtures() / "trajectories/local.txt"));
    CHECK(none.out == "No relevant evidence found.\n");
    CHECK(cli("refine " + q(dir / "t.txt") + " --alpha 0").exit_code == 1);
}

TEST_CASE("bench reports hand-scored metrics, independent of concurrency") {
    testing::TempDir dir;
    auto data = q(testing::fixtures() / "kapalkundala/dataset.jsonl");
    auto one = cli("bench " + data + " --config " + kapal_config() + " --concurrency 1 --out " + q(dir / "one"));
    REQUIRE(one.exit_code == 0);
    auto four = cli("bench " + data + " --config " + kapal_config() + " --concurrency 4 --out " + q(dir / "four"));
    REQUIRE(four.exit_code == 0);
    auto m1 = nlohmann::json::parse(testing::slurp(dir / "one/metrics.json"));
    auto m4 = nlohmann::json::parse(testing::slurp(dir / "four/metrics.json"));
    CHECK(m1 == m4);
    CHECK(m1["samples"] == 3);
    CHECK(m1["em"].get<double>() == doctest::Approx(2.0 / 3.0));
    CHECK(m1["f1"].get<double>() == doctest::Approx(8.0 / 9.0));
    CHECK(one.out.find("0.6667") != std::string::npos);
    CHECK(testing::slurp(dir / "four/records.jsonl").find("kapal-3") != std::string::npos);
}
