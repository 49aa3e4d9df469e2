#include <doctest.h>

#include "helpers.hpp"
#include "strata/config.hpp"
#include "strata/errors.hpp"
#include "strata/planner.hpp"
#include "strata/text.hpp"

using namespace strata;

namespace {

const std::string kMain = "Who is the sibling of the author of Kapalkundala?";

Engine kapal_engine() {
    return build_engine(load_config(testing::fixtures() / "kapalkundala/config.json"));
}

class DownClient final : public GenerationClient {
public:
    Generation generate(std::span<const Message>, std::span<const std::string>) override {
        throw ClientFailure("endpoint down");
    }
};

PlannerDeps with_planner_script(const Engine& e, ScriptedClient::Scripts script, int round_limit = 4) {
    PlannerDeps d = e.planner->deps();
    d.planner_client = std::make_shared<ScriptedClient>(std::move(script));
    d.planner.round_limit = round_limit;
    return d;
}

}  // namespace

TEST_CASE("kapalkundala question end to end") {
    Engine e = kapal_engine();
    auto out = e.planner->answer(kMain);
    REQUIRE(out.answer);
    CHECK(exact_match(*out.answer, std::string("Sanjib Chandra Chattopadhyay")) == 1);
    REQUIRE(out.trace.children.size() == 4);
    CHECK(out.trace.children[0].agent == "local");
    CHECK(out.trace.children[1].agent == "web");
    CHECK(out.trace.children[0].planner_round == 1);
    CHECK(out.trace.children[1].planner_round == 1);
    CHECK(out.trace.children[2].planner_round == 2);
    CHECK(out.trace.children[3].planner_round == 3);
    auto counts = count_searches(out.trace);
    CHECK(counts.local >= 2);
    CHECK(counts.web >= 1);
    CHECK(audit_copying(out.trace).empty());
    CHECK(audit_results(out.trace).empty());
    SearchCounts sum;
    for (const auto& c : out.trace.children) sum += count_searches(c.trajectory);
    CHECK(counts == sum);
}

TEST_CASE("an immediate answer spawns no children") {
    Engine e = kapal_engine();
    Planner p(with_planner_script(e, {{"q", {"<think>known</think><answer>x</answer>"}}}));
    auto out = p.answer("q");
    CHECK(out.answer == "x");
    CHECK(out.trace.children.empty());
}

TEST_CASE("planner round limit") {
    Engine e = kapal_engine();
    Planner p(with_planner_script(
        e, {{kMain, {"<think>a</think><local_search_agent>Who wrote Kapalkundala?</local_search_agent>",
                     "<answer>late</answer>"}}},
        1));
    auto out = p.answer(kMain);
    CHECK_FALSE(out.answer);
    CHECK(out.trace.children.size() == 1);
}

TEST_CASE("failed children surface as error lines") {
    Engine e = kapal_engine();
    PlannerDeps d = e.planner->deps();
    d.local.client = std::make_shared<DownClient>();
    d.web.client = std::make_shared<DownClient>();
    Planner p(d);
    std::vector<ChildRollout> sink;
    auto text = p.all_search_agent_tool("Who wrote Kapalkundala?", 1, &sink);
    auto nl = text.find('\n');
    REQUIRE(nl != std::string::npos);
    CHECK(text.substr(0, nl).rfind("ERROR: local_search_agent: ", 0) == 0);
    CHECK(text.substr(nl + 1).rfind("ERROR: web_search_agent: ", 0) == 0);
    REQUIRE(sink.size() == 2);
    CHECK(sink[0].error);
    CHECK(sink[1].error);
}

TEST_CASE("one failed side keeps the other's evidence") {
    Engine e = kapal_engine();
    PlannerDeps d = e.planner->deps();
    d.web.client = std::make_shared<DownClient>();
    Planner p(d);
    auto text = p.all_search_agent_tool("Who is the sibling of the author of Kapalkundala", 1);
    CHECK(text.rfind("Local ", 0) == 0);
    auto last = text.rfind('\n');
    REQUIRE(last != std::string::npos);
    CHECK(text.substr(last + 1).rfind("ERROR: web_search_agent: ", 0) == 0);
}

TEST_CASE("empty questions and missing evidence") {
    Engine e = kapal_engine();
    CHECK(e.planner->local_search_agent_tool("  ") == "ERROR: empty query");
    CHECK(e.planner->web_search_agent_tool("") == "ERROR: empty query");
    CHECK(e.planner->all_search_agent_tool(" \n ") == "ERROR: empty query");
    CHECK(e.planner->web_search_agent_tool("Which travelogue did Sanjib Chandra Chattopadhyay write?") ==
          kNoEvidenceSentinel);
}

TEST_CASE("planner tool results never carry child reasoning") {
    Engine e = kapal_engine();
    std::vector<ChildRollout> sink;
    auto rendered = e.planner->local_search_agent_tool("Who wrote Kapalkundala?", 1, &sink);
    REQUIRE(sink.size() == 1);
    // The second think restates evidence, which may legitimately appear.
    const auto& segs = sink[0].trajectory.segments;
    REQUIRE(segs[0].kind == SegmentKind::Think);
    CHECK(rendered.find(std::string(text::trim(segs[0].payload))) == std::string::npos);
    CHECK(rendered.find("<think>") == std::string::npos);
    CHECK(rendered == render_tool_result({&sink[0]}));
}

TEST_CASE("audits flag tampered traces") {
    Engine e = kapal_engine();
    auto out = e.planner->answer(kMain);
    PlannerTrace bad = out.trace;
    std::string leaked;
    for (const auto& s : bad.children[0].trajectory.segments) {
        if (s.kind == SegmentKind::Think && leaked.empty()) leaked = std::string(text::trim(s.payload));
    }
    REQUIRE_FALSE(leaked.empty());
    for (auto& s : bad.planner.segments) {
        if (s.kind == SegmentKind::ToolResult) {
            s.payload += "\n" + leaked + "\n";
            break;
        }
    }
    CHECK_FALSE(audit_copying(bad).empty());
    CHECK_FALSE(audit_results(bad).empty());
}

TEST_CASE("trace save and load round trip") {
    Engine e = kapal_engine();
    auto out = e.planner->answer(kMain);
    testing::TempDir dir;
    save_trace(out.trace, dir / "trace.jsonl");
    PlannerTrace back = load_trace(dir / "trace.jsonl");
    CHECK(back.planner == out.trace.planner);
    REQUIRE(back.children.size() == out.trace.children.size());
    for (std::size_t i = 0; i < back.children.size(); ++i) {
        CHECK(back.children[i].trajectory == out.trace.children[i].trajectory);
        CHECK(back.children[i].agent == out.trace.children[i].agent);
        REQUIRE(back.children[i].refined.has_value() == out.trace.children[i].refined.has_value());
        if (back.children[i].refined) {
            CHECK(format_refined(*back.children[i].refined) == format_refined(*out.trace.children[i].refined));
        }
    }
    CHECK(count_searches(back) == count_searches(out.trace));
    CHECK(audit_results(back).empty());
    testing::spit(dir / "bad.jsonl", "{\"type\":\"child\"}\n");
    CHECK_THROWS_AS(load_trace(dir / "bad.jsonl"), StorageCorrupt);
    CHECK_THROWS_AS(load_trace(dir / "missing.jsonl"), StorageFailure);
}

TEST_CASE("planner generation failure keeps the partial trace") {
    Engine e = kapal_engine();
    PlannerDeps d = e.planner->deps();
    d.planner_client = std::make_shared<DownClient>();
    Planner p(d);
    try {
        p.answer(kMain);
        FAIL("expected PlannerAborted");
    } catch (const PlannerAborted& a) {
        CHECK(a.trace.children.empty());
        CHECK(a.trace.planner.question == kMain);
    }
    PlannerDeps broken = e.planner->deps();
    broken.embedder = nullptr;
    CHECK_THROWS_AS(Planner{broken}, ConfigError);
}
