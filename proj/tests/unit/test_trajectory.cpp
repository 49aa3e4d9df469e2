#include <doctest.h>

#include "helpers.hpp"
#include "strata/agent.hpp"
#include "strata/errors.hpp"
#include "strata/trajectory.hpp"

using namespace strata;

namespace {

const Toolset kLocal = tools::local_toolset();

std::vector<std::string> tool_sequence(const ParsedTrajectory& t) {
    std::vector<std::string> out;
    for (const auto& s : t.segments) {
        if (s.kind == SegmentKind::ToolCall) out.push_back(s.tool_name);
    }
    return out;
}

}  // namespace

TEST_CASE("parse a minimal trajectory") {
    auto t = parse("Question: q\n<think>a</think><chunk_search>x</chunk_search><result>r</result><think>b</think>"
                   "<answer>y</answer>",
                   kLocal);
    CHECK(t.question == "q");
    REQUIRE(t.segments.size() == 5);
    CHECK(t.segments[1].kind == SegmentKind::ToolCall);
    CHECK(t.segments[1].tool_name == "chunk_search");
    CHECK(t.segments[4].payload == "y");
    CHECK(t.stray_text.empty());
}

TEST_CASE("whitespace between tags is ignored, text is kept as stray") {
    auto t = parse("<think>a</think>\n\n  <answer>y</answer>", kLocal);
    CHECK(t.stray_text.empty());
    auto u = parse("<think>a</think> hello <answer>y</answer>", kLocal);
    REQUIRE(u.stray_text.size() == 1);
    CHECK(u.stray_text[0] == "hello");
}

TEST_CASE("unknown tags are literal text") {
    auto t = parse("<think>use <b>bold</b></think><answer>y</answer>", kLocal);
    CHECK(t.segments[0].payload == "use <b>bold</b>");
    auto u = parse("<think>a</think><web_search>x</web_search><answer>y</answer>", kLocal);
    REQUIRE(u.segments.size() == 2);
    REQUIRE(u.stray_text.size() == 1);
    CHECK(u.stray_text[0] == "<web_search>x</web_search>");
}

TEST_CASE("the first matching closing tag closes the block") {
    auto t = parse("<think>a <think>b</think><answer>y</answer>", kLocal);
    CHECK(t.segments[0].payload == "a <think>b");
    CHECK_THROWS_AS(parse("<think>a</think>b</think><answer>y</answer>", kLocal), MalformedTrajectory);
}

TEST_CASE("malformed trajectories throw") {
    CHECK_THROWS_AS(parse("<think>a", kLocal), MalformedTrajectory);
    CHECK_THROWS_AS(parse("a</think>", kLocal), MalformedTrajectory);
    CHECK_THROWS_AS(parse("<result>r</result>", kLocal), MalformedTrajectory);
    CHECK_THROWS_AS(parse("<chunk_search>x</chunk_search><think>t</think>", kLocal), MalformedTrajectory);
    CHECK_THROWS_AS(parse("<answer>a</answer><answer>b</answer>", kLocal), MalformedTrajectory);
    CHECK_THROWS_AS(parse("<answer>a</answer><think>b</think>", kLocal), MalformedTrajectory);
}

TEST_CASE("a trailing tool call without result parses") {
    auto t = parse("<think>a</think><chunk_search>x</chunk_search>", kLocal);
    CHECK(t.segments.back().kind == SegmentKind::ToolCall);
}

TEST_CASE("empty text parses to nothing") {
    auto t = parse("", kLocal);
    CHECK(t.segments.empty());
    CHECK(t.question.empty());
}

TEST_CASE("pending call detection") {
    auto p = detect_pending_call("<think>a</think><graph_search> q </graph_search>", kLocal);
    REQUIRE(p);
    CHECK(p->tool_name == "graph_search");
    CHECK(p->payload == " q ");
    CHECK_FALSE(detect_pending_call("<think>a</think><answer>x</answer>", kLocal));
    CHECK_FALSE(detect_pending_call("<think>a</think><graph_search> q", kLocal));
    CHECK_FALSE(detect_pending_call("<chunk_search>x</chunk_search><result>r</result>", kLocal));
    CHECK_FALSE(detect_pending_call("<think>a</think><web_search>x</web_search>", kLocal));
}

TEST_CASE("render then parse is the identity") {
    ParsedTrajectory t;
    t.question = "who?";
    t.toolset = kLocal;
    t.segments = {{SegmentKind::Think, "", " a "},
                  {SegmentKind::ToolCall, "chunk_search", "q"},
                  {SegmentKind::ToolResult, "", "\nLocal Chunk Corpus: x\n"},
                  {SegmentKind::Answer, "", "y"}};
    CHECK(parse(render(t), kLocal) == t);
}

TEST_CASE("to_rounds pairs thinks, queries and evidence") {
    auto t = parse("<think>a</think><think>b</think><chunk_search> q1 </chunk_search><result>\nLocal Chunk Corpus: x\n\n"
                   "Local Chunk Corpus: y\n</result><graph_search>q2</graph_search><result>nothing</result>"
                   "<think>c</think><answer> z </answer>",
                   kLocal);
    RoundView v = to_rounds(t);
    REQUIRE(v.rounds.size() == 2);
    CHECK(v.rounds[0].think == "a\nb");
    CHECK(v.rounds[0].query == "q1");
    REQUIRE(v.rounds[0].evidence.size() == 2);
    CHECK(v.rounds[0].evidence[1].text == "y");
    CHECK(v.rounds[0].evidence[1].rank == 2);
    CHECK(v.rounds[0].evidence[1].round_index == 1);
    CHECK(v.rounds[1].think.empty());
    CHECK(v.rounds[1].evidence.empty());
    CHECK(v.final_think == "c");
    CHECK(v.conclusion == "z");
}

TEST_CASE("split_evidence reads labels and multi-line items") {
    auto ev = split_evidence("ERROR notice\nWeb Page: line one\nline two\n\nLocal Knowledge Graph: [Subject] a", 3);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].source == EvidenceSource::WebPage);
    CHECK(ev[0].text == "line one\nline two");
    CHECK(ev[1].source == EvidenceSource::LocalGraph);
    CHECK(ev[1].round_index == 3);
    CHECK(split_evidence("Web Page:", 1).empty());
}

TEST_CASE("evidence formatting") {
    CHECK(format_triple_text("s", "p", "o") == "[Subject] s [Predicate] p [Object] o");
    CHECK(format_evidence_list({{EvidenceSource::LocalChunk, "a"}, {EvidenceSource::WebSearch, "b"}}) ==
          "Local Chunk Corpus: a\n\nSearch Engine: b");
    for (auto s : {EvidenceSource::LocalChunk, EvidenceSource::LocalGraph, EvidenceSource::LocalAdjacent,
                   EvidenceSource::WebSearch, EvidenceSource::WebPage}) {
        CHECK(source_from_label(source_label(s)) == s);
    }
    CHECK(is_local(EvidenceSource::LocalAdjacent));
    CHECK_FALSE(is_local(EvidenceSource::WebPage));
}

TEST_CASE("reference planner trajectory") {
    auto t = parse(testing::slurp(testing::fixtures() / "trajectories/planner.txt"), tools::planner_toolset());
    CHECK(tool_sequence(t) == std::vector<std::string>{"all_search_agent", "local_search_agent", "web_search_agent"});
    CHECK(to_rounds(t).conclusion == "Sanjib Chandra Chattopadhyay.");
    CHECK(t.question == "Who is the sibling of the author of Kapalkundala?");
}

TEST_CASE("reference local agent trajectory") {
    auto t = parse(testing::slurp(testing::fixtures() / "trajectories/local.txt"), tools::local_toolset());
    CHECK(tool_sequence(t) == std::vector<std::string>{"chunk_search", "graph_search", "chunk_search"});
    CHECK(to_rounds(t).conclusion == "Latchmiudayi");
}

TEST_CASE("reference web agent trajectory") {
    auto t = parse(testing::slurp(testing::fixtures() / "trajectories/web.txt"), tools::web_toolset());
    CHECK(tool_sequence(t) ==
          std::vector<std::string>{"web_search", "browse_url", "browse_url", "browse_url", "browse_url"});
    CHECK(to_rounds(t).conclusion == "Sanjib Chandra Chattopadhyay");
}
