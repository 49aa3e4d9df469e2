#include "strata/eval.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "strata/errors.hpp"
#include "strata/text.hpp"

namespace strata {

using nlohmann::json;

std::string normalize_answer(std::string_view input) {
    std::string lowered = text::to_lower_ascii(input);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    std::size_t pos = 0;
    while (pos < lowered.size()) {
        std::size_t start = pos;
        char32_t cp = text::next_codepoint(lowered, pos);
        if (text::is_unicode_punct(cp)) continue;
        no_punct.append(lowered, start, pos - start);
    }
    // An article is dropped only in determiner position, before a word of
    // two or more characters, so letter sequences like "a b c" survive.
    auto toks = text::whitespace_tokens(no_punct);
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const bool article = toks[i] == "a" || toks[i] == "an" || toks[i] == "the";
        if (article && i + 1 < toks.size() && text::codepoints(toks[i + 1]).size() >= 2) continue;
        kept.push_back(std::move(toks[i]));
    }
    return text::join(kept, " ");
}

std::vector<std::string> answer_tokens(std::string_view normalized) {
    std::vector<std::string> out;
    for (const auto& tok : text::whitespace_tokens(normalized)) {
        std::string run;
        std::size_t pos = 0;
        while (pos < tok.size()) {
            std::size_t start = pos;
            char32_t cp = text::next_codepoint(tok, pos);
            if (text::is_cjk(cp)) {
                if (!run.empty()) out.push_back(std::move(run));
                run.clear();
                out.push_back(tok.substr(start, pos - start));
            } else {
                run.append(tok, start, pos - start);
            }
        }
        if (!run.empty()) out.push_back(std::move(run));
    }
    return out;
}

int exact_match(std::string_view prediction, std::string_view gold) {
    return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

double f1_score(std::string_view prediction, std::string_view gold) {
    auto p = answer_tokens(normalize_answer(prediction));
    auto g = answer_tokens(normalize_answer(gold));
    if (p.empty() || g.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    int common = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(p.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

int exact_match(std::string_view prediction, const std::vector<std::string>& golds) {
    int best = 0;
    for (const auto& g : golds) best = std::max(best, exact_match(prediction, g));
    return best;
}

double f1_score(std::string_view prediction, const std::vector<std::string>& golds) {
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_score(prediction, g));
    return best;
}

// ---------------------------------------------------------------------------

namespace {

void check_structure(const ParsedTrajectory& t, FormatMode mode, FormatReport& report) {
    int answers = 0;
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
        const Segment& s = t.segments[i];
        if (s.kind == SegmentKind::Answer) ++answers;
        if (s.kind == SegmentKind::ToolCall) {
            report.tool_types_used.insert(s.tool_name);
            if (!t.toolset.count(s.tool_name)) report.violations.push_back("tool '" + s.tool_name + "' not in toolset");
            if (i + 1 >= t.segments.size()) report.violations.push_back("tool call without result");
        }
        if (mode == FormatMode::Strict) {
            const bool needs_think = s.kind == SegmentKind::ToolCall || s.kind == SegmentKind::Answer;
            if (needs_think && (i == 0 || t.segments[i - 1].kind != SegmentKind::Think)) {
                report.violations.push_back(std::string("<") + std::string(tag_name(s)) + "> not preceded by <think>");
            }
            if (s.kind == SegmentKind::Think && i > 0 && t.segments[i - 1].kind == SegmentKind::Think) {
                report.violations.emplace_back("consecutive <think> blocks");
            }
        }
    }
    if (answers == 0) report.violations.emplace_back("no answer");
    if (answers > 1) report.violations.emplace_back("multiple answers");

    static const std::regex undeclared(R"(<([A-Za-z_][A-Za-z0-9_]*)>[\s\S]*?</\1>)");
    for (const auto& stray : t.stray_text) {
        for (std::sregex_iterator it(stray.begin(), stray.end(), undeclared), end; it != end; ++it) {
            report.violations.push_back("undeclared tool '" + (*it)[1].str() + "'");
        }
        if (mode == FormatMode::Strict) report.violations.push_back("text outside tags: " + stray.substr(0, 40));
    }
}

}  // namespace

FormatReport validate_format(const ParsedTrajectory& trajectory, FormatMode mode) {
    FormatReport report;
    report.toolset_size = trajectory.toolset.size();
    check_structure(trajectory, mode, report);
    report.valid = report.violations.empty();
    return report;
}

FormatReport validate_format(std::string_view trajectory_text, const Toolset& toolset, FormatMode mode) {
    try {
        return validate_format(parse(trajectory_text, toolset), mode);
    } catch (const MalformedTrajectory& e) {
        FormatReport report;
        report.toolset_size = toolset.size();
        report.violations.emplace_back(e.what());
        return report;
    }
}

double reward_from(const FormatReport& format, double f1) {
    if (!format.valid) return 0.0;
    if (f1 > 0.0) return f1;
    if (format.toolset_size == 0) return 0.0;
    return 0.1 * static_cast<double>(format.tool_types_used.size()) / static_cast<double>(format.toolset_size);
}

namespace {

RewardReport score(FormatReport format, std::optional<std::string> prediction, const std::vector<std::string>& golds) {
    RewardReport r;
    r.format = std::move(format);
    r.golds = golds;
    r.prediction = prediction.value_or("");
    if (prediction) {
        r.em = exact_match(*prediction, golds);
        r.f1 = f1_score(*prediction, golds);
    }
    r.reward = reward_from(r.format, r.f1);
    return r;
}

std::optional<std::string> answer_of(const ParsedTrajectory& t) {
    for (auto it = t.segments.rbegin(); it != t.segments.rend(); ++it) {
        if (it->kind == SegmentKind::Answer) return std::string(text::trim(it->payload));
    }
    return std::nullopt;
}

}  // namespace

RewardReport compute_reward(const ParsedTrajectory& trajectory, const std::vector<std::string>& golds,
                            FormatMode mode) {
    return score(validate_format(trajectory, mode), answer_of(trajectory), golds);
}

RewardReport compute_reward(std::string_view trajectory_text, const std::vector<std::string>& golds,
                            const Toolset& toolset, FormatMode mode) {
    try {
        return compute_reward(parse(trajectory_text, toolset), golds, mode);
    } catch (const MalformedTrajectory& e) {
        FormatReport format;
        format.toolset_size = toolset.size();
        format.violations.emplace_back(e.what());
        return score(std::move(format), std::nullopt, golds);
    }
}

SearchCounts& SearchCounts::operator+=(const SearchCounts& o) {
    local += o.local;
    web += o.web;
    browse += o.browse;
    return *this;
}

SearchCounts count_searches(const ParsedTrajectory& trajectory) {
    SearchCounts c;
    for (const auto& s : trajectory.segments) {
        if (s.kind != SegmentKind::ToolCall) continue;
        if (s.tool_name == "chunk_search" || s.tool_name == "graph_search" || s.tool_name == "get_adjacent_passages") {
            ++c.local;
        } else if (s.tool_name == "web_search") {
            ++c.web;
        } else if (s.tool_name == "browse_url") {
            ++c.browse;
        }
    }
    return c;
}

std::size_t reasoning_tokens(const ParsedTrajectory& trajectory) {
    std::size_t n = 0;
    for (const auto& s : trajectory.segments) {
        if (s.kind == SegmentKind::Think) n += text::whitespace_tokens(s.payload).size();
    }
    return n;
}

// ---------------------------------------------------------------------------

DatasetLoad load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read dataset: " + path.string());
    DatasetLoad out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
        auto rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) {
            out.rejected.push_back(where + "not a JSON object");
            continue;
        }
        if (!rec.contains("question") || !rec["question"].is_string() || text::is_blank(rec["question"].get<std::string>())) {
            out.rejected.push_back(where + "missing question");
            continue;
        }
        Sample s;
        s.question = rec["question"].get<std::string>();
        if (rec.contains("id")) {
            s.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
        } else {
            s.id = std::to_string(lineno);
        }
        const json* golds = rec.contains("golden_answers") ? &rec["golden_answers"] : nullptr;
        if (golds && golds->is_string()) {
            s.golds.push_back(golds->get<std::string>());
        } else if (golds && golds->is_array() && std::all_of(golds->begin(), golds->end(), [](const json& g) { return g.is_string(); })) {
            s.golds = golds->get<std::vector<std::string>>();
        }
        if (s.golds.empty()) {
            out.rejected.push_back(where + "golden_answers must be a non-empty list of strings");
            continue;
        }
        out.samples.push_back(std::move(s));
    }
    return out;
}

json to_json(const SampleRecord& r) {
    json j{{"id", r.id},
           {"question", r.question},
           {"golden_answers", r.golds},
           {"prediction", r.prediction ? json(*r.prediction) : json(nullptr)},
           {"em", r.em},
           {"f1", r.f1},
           {"searches", {{"local", r.searches.local}, {"web", r.searches.web}, {"browse", r.searches.browse}}},
           {"reasoning_tokens", r.reasoning_tokens}};
    if (r.error) j["error"] = *r.error;
    return j;
}

json to_json(const MetricsReport& r) {
    json per = json::array();
    for (const auto& s : r.per_sample) per.push_back(to_json(s));
    return json{{"samples", r.per_sample.size()},
                {"em", r.em_mean},
                {"f1", r.f1_mean},
                {"avg_local_searches", r.avg_local_searches},
                {"avg_web_searches", r.avg_web_searches},
                {"avg_browses", r.avg_browses},
                {"avg_reasoning_tokens", r.avg_reasoning_tokens},
                {"interrupted", r.interrupted},
                {"per_sample", per}};
}

MetricsReport aggregate(std::vector<SampleRecord> records) {
    MetricsReport m;
    m.per_sample = std::move(records);
    if (m.per_sample.empty()) return m;
    const double n = static_cast<double>(m.per_sample.size());
    for (const auto& r : m.per_sample) {
        m.em_mean += r.em;
        m.f1_mean += r.f1;
        m.avg_local_searches += r.searches.local;
        m.avg_web_searches += r.searches.web;
        m.avg_browses += r.searches.browse;
        m.avg_reasoning_tokens += static_cast<double>(r.reasoning_tokens);
    }
    m.em_mean /= n;
    m.f1_mean /= n;
    m.avg_local_searches /= n;
    m.avg_web_searches /= n;
    m.avg_browses /= n;
    m.avg_reasoning_tokens /= n;
    return m;
}

MetricsReport run_benchmark(const std::vector<Sample>& dataset, const Pipeline& pipeline,
                            const BenchmarkOptions& options) {
    if (dataset.empty()) throw std::invalid_argument("run_benchmark: empty dataset");

    std::vector<std::optional<SampleRecord>> slots(dataset.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> interrupted{false};
    std::mutex sink_mu;
    std::ofstream sink;
    if (options.records_path) {
        sink.open(*options.records_path, std::ios::trunc);
        if (!sink) throw StorageFailure("cannot write " + options.records_path->string());
    }

    auto worker = [&] {
        while (true) {
            if (options.stop && options.stop->load()) {
                interrupted = true;
                return;
            }
            const std::size_t i = next.fetch_add(1);
            if (i >= dataset.size()) return;
            const Sample& s = dataset[i];
            SampleRecord rec;
            rec.id = s.id;
            rec.question = s.question;
            rec.golds = s.golds;
            try {
                PipelineResult res = pipeline(s);
                rec.prediction = res.answer;
                rec.searches = res.searches;
                rec.reasoning_tokens = res.reasoning_tokens;
                if (res.answer) {
                    rec.em = exact_match(*res.answer, s.golds);
                    rec.f1 = f1_score(*res.answer, s.golds);
                }
            } catch (const std::exception& e) {
                rec.error = e.what();
            }
            if (sink.is_open()) {
                std::lock_guard lock(sink_mu);
                sink << to_json(rec).dump() << '\n';
                sink.flush();
            }
            slots[i] = std::move(rec);
        }
    };

    const int threads = std::max(1, std::min<int>(options.concurrency, static_cast<int>(dataset.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<SampleRecord> done;
    for (auto& s : slots) {
        if (s) done.push_back(std::move(*s));
    }
    MetricsReport report = aggregate(std::move(done));
    report.interrupted = interrupted.load();
    return report;
}

// ---------------------------------------------------------------------------

namespace {

std::map<std::string, int> tool_counts_of(const std::string& text, const Toolset& toolset) {
    std::map<std::string, int> out;
    try {
        for (const auto& s : parse(text, toolset).segments) {
            if (s.kind == SegmentKind::ToolCall) ++out[s.tool_name];
        }
    } catch (const MalformedTrajectory&) {
    }
    return out;
}

}  // namespace

std::size_t export_rollouts(const std::vector<ScoredRollout>& rollouts, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageFailure("cannot write " + path.string());
    for (const auto& r : rollouts) {
        json rec{{"question", r.question},
                 {"trajectory", r.trajectory_text},
                 {"toolset", std::vector<std::string>(r.toolset.begin(), r.toolset.end())},
                 {"golds", r.report.golds},
                 {"reward", r.report.reward},
                 {"em", r.report.em},
                 {"f1", r.report.f1},
                 {"tool_counts", tool_counts_of(r.trajectory_text, r.toolset)}};
        out << rec.dump() << '\n';
    }
    out.flush();
    if (!out) throw StorageFailure("write failed: " + path.string());
    return rollouts.size();
}

std::vector<ExportedRollout> import_rollouts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageFailure("cannot read " + path.string());
    std::vector<ExportedRollout> out;
    std::string line;
    while (std::getline(in, line)) {
        if (text::is_blank(line)) continue;
        auto rec = json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw StorageFailure("malformed rollout record in " + path.string());
        ExportedRollout r;
        r.question = rec.value("question", "");
        r.trajectory_text = rec.value("trajectory", "");
        for (const auto& t : rec.value("toolset", std::vector<std::string>{})) r.toolset.insert(t);
        r.golds = rec.value("golds", std::vector<std::string>{});
        r.reward = rec.value("reward", 0.0);
        r.em = rec.value("em", 0);
        r.f1 = rec.value("f1", 0.0);
        r.tool_counts = rec.value("tool_counts", std::map<std::string, int>{});
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace strata
