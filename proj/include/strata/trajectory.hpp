#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

// Tag grammar for agent rollouts:
//
//   Question: <x>
//   <think>...</think><tool_name>query</tool_name><result>...</result>
//   ...
//   <think>...</think><answer>...</answer>
//
// Tool tags are only recognized for names in the caller-supplied toolset;
// anything else is literal text.
namespace strata {

using Toolset = std::set<std::string, std::less<>>;

enum class SegmentKind { Think, ToolCall, ToolResult, Answer };

struct Segment {
    SegmentKind kind = SegmentKind::Think;
    std::string tool_name;  // ToolCall only
    std::string payload;

    bool operator==(const Segment&) const = default;
};

struct ParsedTrajectory {
    std::string question;
    std::vector<Segment> segments;
    Toolset toolset;
    // Non-whitespace text found between tags. Not rendered.
    std::vector<std::string> stray_text;

    bool operator==(const ParsedTrajectory&) const = default;
};

enum class EvidenceSource { LocalChunk, LocalGraph, LocalAdjacent, WebSearch, WebPage };

bool is_local(EvidenceSource s);
std::string_view source_label(EvidenceSource s);
std::optional<EvidenceSource> source_from_label(std::string_view label);

struct Evidence {
    std::string text;
    EvidenceSource source = EvidenceSource::LocalChunk;
    int round_index = 0;
    int rank = 0;  // 1-based position inside its round's result

    bool operator==(const Evidence&) const = default;
};

struct Round {
    std::string think;
    std::string query;
    std::string tool_name;
    std::vector<Evidence> evidence;
    int round_index = 0;  // 1-based
};

struct RoundView {
    std::vector<Round> rounds;
    std::string final_think;
    std::optional<std::string> conclusion;
};

struct PendingCall {
    std::string tool_name;
    std::string payload;

    bool operator==(const PendingCall&) const = default;
};

std::string_view tag_name(const Segment& s);

// Throws MalformedTrajectory on unbalanced tags, orphan results, a tool call
// left without result before later segments, or more than one answer.
ParsedTrajectory parse(std::string_view text, const Toolset& toolset);

// Lenient scan of a partial generation. Returns the last completed block if
// it is a tool call.
std::optional<PendingCall> detect_pending_call(std::string_view stream, const Toolset& toolset);

std::string render(const ParsedTrajectory& trajectory);

RoundView to_rounds(const ParsedTrajectory& trajectory);

// Evidence line convention inside <result>: each item opens with
// "<Source Label>: " at the start of a line; items are separated by a blank
// line. Lines before the first label (error notices, ellipses) are ignored.
std::vector<Evidence> split_evidence(std::string_view payload, int round_index);
std::string format_evidence(EvidenceSource source, std::string_view text);
std::string format_evidence_list(const std::vector<std::pair<EvidenceSource, std::string>>& items);
std::string format_triple_text(std::string_view subject, std::string_view predicate, std::string_view object);

}  // namespace strata
