#include "strata/trajectory.hpp"

#include <array>

#include "strata/errors.hpp"
#include "strata/text.hpp"

namespace strata {

namespace {

constexpr std::array<std::pair<EvidenceSource, std::string_view>, 5> kLabels{{
    {EvidenceSource::LocalChunk, "Local Chunk Corpus"},
    {EvidenceSource::LocalGraph, "Local Knowledge Graph"},
    {EvidenceSource::LocalAdjacent, "Adjacent Passages"},
    {EvidenceSource::WebSearch, "Search Engine"},
    {EvidenceSource::WebPage, "Web Page"},
}};

bool is_ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Reads "<name>" or "</name>" at `pos`. Returns the name (empty if the text
// at pos is not a tag-shaped token) and whether it is a closing tag.
struct TagToken {
    std::string_view name;
    bool closing = false;
    std::size_t length = 0;
};

TagToken read_tag(std::string_view s, std::size_t pos) {
    TagToken t;
    std::size_t i = pos + 1;
    if (i < s.size() && s[i] == '/') {
        t.closing = true;
        ++i;
    }
    std::size_t start = i;
    while (i < s.size() && is_ident_char(s[i])) ++i;
    if (i == start || i >= s.size() || s[i] != '>') return {};
    t.name = s.substr(start, i - start);
    t.length = i + 1 - pos;
    return t;
}

bool is_known(std::string_view name, const Toolset& toolset) {
    return name == "think" || name == "answer" || name == "result" || toolset.count(name) > 0;
}

Segment make_segment(std::string_view name, std::string_view payload) {
    Segment seg;
    seg.payload = std::string(payload);
    if (name == "think") {
        seg.kind = SegmentKind::Think;
    } else if (name == "answer") {
        seg.kind = SegmentKind::Answer;
    } else if (name == "result") {
        seg.kind = SegmentKind::ToolResult;
    } else {
        seg.kind = SegmentKind::ToolCall;
        seg.tool_name = std::string(name);
    }
    return seg;
}

struct Block {
    Segment segment;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Splits text into complete known-tag blocks. In strict mode an unclosed or
// orphan closing tag throws; otherwise scanning stops at the first unclosed
// block.
std::vector<Block> scan_blocks(std::string_view text, const Toolset& toolset, bool strict) {
    std::vector<Block> blocks;
    std::size_t pos = 0;
    while (true) {
        std::size_t lt = text.find('<', pos);
        if (lt == std::string_view::npos) break;
        TagToken tag = read_tag(text, lt);
        if (tag.name.empty() || !is_known(tag.name, toolset)) {
            pos = lt + 1;
            continue;
        }
        if (tag.closing) {
            if (strict) throw MalformedTrajectory("unbalanced closing tag </" + std::string(tag.name) + ">");
            pos = lt + tag.length;
            continue;
        }
        std::string close = "</" + std::string(tag.name) + ">";
        std::size_t body = lt + tag.length;
        std::size_t close_at = text.find(close, body);
        if (close_at == std::string_view::npos) {
            if (strict) throw MalformedTrajectory("unclosed tag <" + std::string(tag.name) + ">");
            break;
        }
        Block b;
        b.segment = make_segment(tag.name, text.substr(body, close_at - body));
        b.begin = lt;
        b.end = close_at + close.size();
        pos = b.end;
        blocks.push_back(std::move(b));
    }
    return blocks;
}

std::string question_from_preamble(std::string_view preamble) {
    std::size_t pos = 0;
    while (pos <= preamble.size()) {
        std::size_t nl = preamble.find('\n', pos);
        std::string_view line = preamble.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        std::string_view t = text::trim(line);
        constexpr std::string_view kPrefix = "Question:";
        if (t.substr(0, kPrefix.size()) == kPrefix) return std::string(text::trim(t.substr(kPrefix.size())));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return std::string(text::trim(preamble));
}

void check_alternation(const std::vector<Segment>& segs) {
    int answers = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const Segment& s = segs[i];
        if (answers > 0) {
            if (s.kind == SegmentKind::Answer) throw MalformedTrajectory("multiple answers");
            throw MalformedTrajectory("segment after answer");
        }
        switch (s.kind) {
            case SegmentKind::Answer:
                ++answers;
                break;
            case SegmentKind::ToolResult:
                if (i == 0 || segs[i - 1].kind != SegmentKind::ToolCall)
                    throw MalformedTrajectory("result without a preceding tool call");
                break;
            case SegmentKind::ToolCall:
                if (i + 1 < segs.size() && segs[i + 1].kind != SegmentKind::ToolResult)
                    throw MalformedTrajectory("tool call <" + s.tool_name + "> has no result");
                break;
            case SegmentKind::Think:
                break;
        }
    }
}

void append_think(std::string& acc, std::string_view t) {
    if (t.empty()) return;
    if (!acc.empty()) acc.push_back('\n');
    acc.append(t);
}

}  // namespace

bool is_local(EvidenceSource s) {
    return s == EvidenceSource::LocalChunk || s == EvidenceSource::LocalGraph || s == EvidenceSource::LocalAdjacent;
}

std::string_view source_label(EvidenceSource s) {
    for (const auto& [src, label] : kLabels) {
        if (src == s) return label;
    }
    return "Unknown";
}

std::optional<EvidenceSource> source_from_label(std::string_view label) {
    for (const auto& [src, l] : kLabels) {
        if (l == label) return src;
    }
    return std::nullopt;
}

std::string_view tag_name(const Segment& s) {
    switch (s.kind) {
        case SegmentKind::Think:
            return "think";
        case SegmentKind::ToolResult:
            return "result";
        case SegmentKind::Answer:
            return "answer";
        case SegmentKind::ToolCall:
            return s.tool_name;
    }
    return "";
}

ParsedTrajectory parse(std::string_view text, const Toolset& toolset) {
    ParsedTrajectory out;
    out.toolset = toolset;
    std::vector<Block> blocks = scan_blocks(text, toolset, true);

    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        std::string_view gap = text.substr(prev_end, blocks[i].begin - prev_end);
        if (i == 0) {
            out.question = question_from_preamble(gap);
        } else if (!text::is_blank(gap)) {
            out.stray_text.emplace_back(text::trim(gap));
        }
        prev_end = blocks[i].end;
        out.segments.push_back(std::move(blocks[i].segment));
    }
    if (blocks.empty()) {
        out.question = question_from_preamble(text);
    } else {
        std::string_view tail = text.substr(prev_end);
        if (!text::is_blank(tail)) out.stray_text.emplace_back(text::trim(tail));
    }
    check_alternation(out.segments);
    return out;
}

std::optional<PendingCall> detect_pending_call(std::string_view stream, const Toolset& toolset) {
    std::vector<Block> blocks = scan_blocks(stream, toolset, false);
    if (blocks.empty()) return std::nullopt;
    const Segment& last = blocks.back().segment;
    if (last.kind != SegmentKind::ToolCall) return std::nullopt;
    return PendingCall{last.tool_name, last.payload};
}

std::string render(const ParsedTrajectory& trajectory) {
    std::string out;
    if (!trajectory.question.empty()) {
        out += "Question: ";
        out += trajectory.question;
        out += '\n';
    }
    for (const auto& seg : trajectory.segments) {
        std::string_view name = tag_name(seg);
        out += '<';
        out += name;
        out += '>';
        out += seg.payload;
        out += "</";
        out += name;
        out += '>';
    }
    return out;
}

RoundView to_rounds(const ParsedTrajectory& trajectory) {
    RoundView view;
    std::string pending_think;
    for (const auto& seg : trajectory.segments) {
        switch (seg.kind) {
            case SegmentKind::Think:
                append_think(pending_think, text::trim(seg.payload));
                break;
            case SegmentKind::ToolCall: {
                Round r;
                r.think = std::move(pending_think);
                pending_think.clear();
                r.query = std::string(text::trim(seg.payload));
                r.tool_name = seg.tool_name;
                r.round_index = static_cast<int>(view.rounds.size()) + 1;
                view.rounds.push_back(std::move(r));
                break;
            }
            case SegmentKind::ToolResult:
                if (!view.rounds.empty()) {
                    view.rounds.back().evidence = split_evidence(seg.payload, view.rounds.back().round_index);
                }
                break;
            case SegmentKind::Answer:
                view.conclusion = std::string(text::trim(seg.payload));
                break;
        }
    }
    view.final_think = std::move(pending_think);
    return view;
}

std::vector<Evidence> split_evidence(std::string_view payload, int round_index) {
    std::vector<Evidence> items;
    bool open = false;
    std::string current;
    EvidenceSource current_source = EvidenceSource::LocalChunk;

    auto flush = [&] {
        if (!open) return;
        std::string_view t = text::trim(current);
        if (!t.empty()) {
            Evidence e;
            e.text = std::string(t);
            e.source = current_source;
            e.round_index = round_index;
            e.rank = static_cast<int>(items.size()) + 1;
            items.push_back(std::move(e));
        }
        current.clear();
        open = false;
    };

    std::size_t pos = 0;
    while (pos <= payload.size()) {
        std::size_t nl = payload.find('\n', pos);
        std::string_view line = payload.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        std::optional<EvidenceSource> starts;
        std::size_t label_len = 0;
        for (const auto& [src, label] : kLabels) {
            if (line.size() > label.size() + 1 && line.substr(0, label.size()) == label &&
                line.substr(label.size(), 2) == ": ") {
                starts = src;
                label_len = label.size() + 2;
                break;
            }
        }
        if (starts) {
            flush();
            open = true;
            current_source = *starts;
            current = std::string(line.substr(label_len));
        } else if (open) {
            current.push_back('\n');
            current.append(line);
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    flush();
    return items;
}

std::string format_evidence(EvidenceSource source, std::string_view text) {
    std::string out(source_label(source));
    out += ": ";
    out += text;
    return out;
}

std::string format_evidence_list(const std::vector<std::pair<EvidenceSource, std::string>>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += "\n\n";
        out += format_evidence(items[i].first, items[i].second);
    }
    return out;
}

std::string format_triple_text(std::string_view subject, std::string_view predicate, std::string_view object) {
    std::string out = "[Subject] ";
    out += subject;
    out += " [Predicate] ";
    out += predicate;
    out += " [Object] ";
    out += object;
    return out;
}

}  // namespace strata
