#include "strata/planner.hpp"

#include <future>
#include <fstream>

#include <json.hpp>

#include "strata/errors.hpp"
#include "strata/text.hpp"

namespace strata {

using nlohmann::json;

namespace {

constexpr std::string_view kLocalName = "local";
constexpr std::string_view kWebName = "web";

struct ChildRun {
    ParsedTrajectory trajectory;
    std::optional<std::string> conclusion;
    std::optional<std::string> error;
};

ChildRun run_child(const LowLevelAgent& agent, const std::string& question) {
    ChildRun out;
    out.trajectory.question = question;
    out.trajectory.toolset = agent.config.toolset;
    try {
        out.trajectory = run_agent(agent.config, question, *agent.tools, *agent.client);
        out.conclusion = extract_answer(out.trajectory);
    } catch (const RolloutAborted& e) {
        out.error = e.what();
        try {
            out.trajectory = parse(e.partial_text, agent.config.toolset);
            out.trajectory.question = question;
        } catch (const MalformedTrajectory&) {
        }
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

ChildRollout finish_child(ChildRun run, std::string_view agent, AgentSide side, const std::string& question,
                          int planner_round, std::optional<std::string> other_conclusion, const PlannerDeps& deps) {
    ChildRollout child;
    child.planner_round = planner_round;
    child.agent = std::string(agent);
    child.question = question;
    child.error = std::move(run.error);
    if (!child.error) {
        try {
            child.refined = refine(run.trajectory, std::move(other_conclusion), deps.refiner, *deps.embedder, side);
        } catch (const NoEvidence&) {
            child.refined = RefinedEvidenceSet{{}, side};
        } catch (const std::exception& e) {
            child.error = std::string("refiner: ") + e.what();
        }
    }
    child.trajectory = std::move(run.trajectory);
    return child;
}

std::string tool_for(std::string_view agent) {
    return std::string(agent == kLocalName ? tools::kLocalAgent : tools::kWebAgent);
}

}  // namespace

Planner::Planner(PlannerDeps deps) : deps_(std::move(deps)) {
    if (!deps_.planner_client || !deps_.embedder) throw ConfigError("planner: missing client or embedder");
    for (const LowLevelAgent* a : {&deps_.local, &deps_.web}) {
        if (!a->tools || !a->client) throw ConfigError("planner: low-level agent " + a->config.name + " is incomplete");
    }
    deps_.refiner.validate();
    deps_.planner.validate();
}

std::string render_tool_result(const std::vector<const ChildRollout*>& children) {
    if (children.empty()) return "ERROR: empty query";
    std::vector<std::string> head, tail;
    std::vector<RefinedEvidenceSet> sets;
    for (const ChildRollout* c : children) {
        if (c->error) {
            auto& dst = c->agent == kLocalName ? head : tail;
            dst.push_back("ERROR: " + tool_for(c->agent) + ": " + *c->error);
        } else if (c->refined) {
            sets.push_back(*c->refined);
        }
    }
    if (!sets.empty()) head.push_back(format_refined(sets));
    head.insert(head.end(), tail.begin(), tail.end());
    return text::join(head, "\n");
}

std::string Planner::local_search_agent_tool(std::string_view question, int planner_round,
                                             std::vector<ChildRollout>* sink) const {
    const std::string q(text::trim(question));
    if (q.empty()) return "ERROR: empty query";
    ChildRollout child =
        finish_child(run_child(deps_.local, q), kLocalName, AgentSide::Local, q, planner_round, std::nullopt, deps_);
    std::string out = render_tool_result({&child});
    if (sink) sink->push_back(std::move(child));
    return out;
}

std::string Planner::web_search_agent_tool(std::string_view question, int planner_round,
                                           std::vector<ChildRollout>* sink) const {
    const std::string q(text::trim(question));
    if (q.empty()) return "ERROR: empty query";
    ChildRollout child =
        finish_child(run_child(deps_.web, q), kWebName, AgentSide::Web, q, planner_round, std::nullopt, deps_);
    std::string out = render_tool_result({&child});
    if (sink) sink->push_back(std::move(child));
    return out;
}

std::string Planner::all_search_agent_tool(std::string_view question, int planner_round,
                                           std::vector<ChildRollout>* sink) const {
    const std::string q(text::trim(question));
    if (q.empty()) return "ERROR: empty query";
    auto local_future = std::async(std::launch::async, [&] { return run_child(deps_.local, q); });
    auto web_future = std::async(std::launch::async, [&] { return run_child(deps_.web, q); });
    ChildRun local = local_future.get();
    ChildRun web = web_future.get();

    std::optional<std::string> local_conclusion = local.error ? std::nullopt : local.conclusion;
    std::optional<std::string> web_conclusion = web.error ? std::nullopt : web.conclusion;
    ChildRollout lc =
        finish_child(std::move(local), kLocalName, AgentSide::Local, q, planner_round, web_conclusion, deps_);
    ChildRollout wc = finish_child(std::move(web), kWebName, AgentSide::Web, q, planner_round, local_conclusion, deps_);
    std::string out = render_tool_result({&lc, &wc});
    if (sink) {
        sink->push_back(std::move(lc));
        sink->push_back(std::move(wc));
    }
    return out;
}

PlannerAnswer Planner::answer(std::string_view question) const {
    std::vector<ChildRollout> children;
    int round = 0;
    ToolRegistry registry;
    registry.add(std::string(tools::kLocalAgent), [&](std::string_view q) {
        return local_search_agent_tool(q, ++round, &children);
    });
    registry.add(std::string(tools::kWebAgent), [&](std::string_view q) {
        return web_search_agent_tool(q, ++round, &children);
    });
    registry.add(std::string(tools::kAllAgents), [&](std::string_view q) {
        return all_search_agent_tool(q, ++round, &children);
    });

    PlannerAnswer out;
    try {
        out.trace.planner = run_agent(deps_.planner, question, registry, *deps_.planner_client);
    } catch (const RolloutAborted& e) {
        PlannerTrace partial;
        partial.children = std::move(children);
        partial.planner.toolset = deps_.planner.toolset;
        try {
            partial.planner = parse(e.partial_text, deps_.planner.toolset);
        } catch (const MalformedTrajectory&) {
        }
        partial.planner.question = std::string(text::trim(question));
        throw PlannerAborted(e.what(), std::move(partial));
    }
    out.trace.children = std::move(children);
    out.answer = extract_answer(out.trace.planner);
    return out;
}

// ---------------------------------------------------------------------------

SearchCounts count_searches(const PlannerTrace& trace) {
    SearchCounts total = count_searches(trace.planner);
    for (const auto& c : trace.children) total += count_searches(c.trajectory);
    return total;
}

namespace {

std::vector<std::string> result_payloads(const ParsedTrajectory& t) {
    std::vector<std::string> out;
    for (const auto& s : t.segments) {
        if (s.kind == SegmentKind::ToolResult) out.emplace_back(text::trim(s.payload));
    }
    return out;
}

}  // namespace

std::vector<std::string> audit_copying(const PlannerTrace& trace) {
    const auto payloads = result_payloads(trace.planner);
    std::vector<std::string> evidence;
    for (const auto& c : trace.children) {
        for (const auto& r : to_rounds(c.trajectory).rounds) {
            for (const auto& e : r.evidence) evidence.push_back(e.text);
        }
    }
    auto in_evidence = [&](const std::string& frag) {
        for (const auto& e : evidence) {
            if (e.find(frag) != std::string::npos) return true;
        }
        return false;
    };

    std::vector<std::string> leaks;
    for (const auto& c : trace.children) {
        for (const auto& s : c.trajectory.segments) {
            if (s.kind != SegmentKind::Think && s.kind != SegmentKind::Answer) continue;
            std::size_t start = 0;
            while (start <= s.payload.size()) {
                std::size_t end = s.payload.find('\n', start);
                if (end == std::string::npos) end = s.payload.size();
                std::string frag(text::trim(std::string_view(s.payload).substr(start, end - start)));
                start = end + 1;
                if (frag.empty() || in_evidence(frag)) continue;
                for (const auto& p : payloads) {
                    if (p.find(frag) != std::string::npos) {
                        leaks.push_back(c.agent + " round " + std::to_string(c.planner_round) + ": " + frag);
                        break;
                    }
                }
            }
        }
    }
    return leaks;
}

std::vector<std::string> audit_results(const PlannerTrace& trace) {
    std::vector<std::string> problems;
    const auto payloads = result_payloads(trace.planner);
    for (std::size_t i = 0; i < payloads.size(); ++i) {
        const int round = static_cast<int>(i) + 1;
        std::vector<const ChildRollout*> kids;
        for (const auto& c : trace.children) {
            if (c.planner_round == round) kids.push_back(&c);
        }
        if (payloads[i] != text::trim(render_tool_result(kids))) {
            problems.push_back("planner result " + std::to_string(round) + " does not match its children");
        }
    }
    return problems;
}

// ---------------------------------------------------------------------------

namespace {

json toolset_json(const Toolset& t) {
    return std::vector<std::string>(t.begin(), t.end());
}

Toolset toolset_from(const json& j) {
    Toolset t;
    for (const auto& s : j) t.insert(s.get<std::string>());
    return t;
}

ParsedTrajectory trajectory_from(const json& rec) {
    const Toolset toolset = toolset_from(rec.at("toolset"));
    ParsedTrajectory t = parse(rec.at("trajectory").get<std::string>(), toolset);
    t.question = rec.at("question").get<std::string>();
    return t;
}

}  // namespace

void save_trace(const PlannerTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageFailure("cannot write trace " + path.string());
    json head{{"type", "planner"},
              {"question", trace.planner.question},
              {"toolset", toolset_json(trace.planner.toolset)},
              {"trajectory", render(trace.planner)}};
    out << head.dump() << '\n';
    for (const auto& c : trace.children) {
        json rec{{"type", "child"},
                 {"planner_round", c.planner_round},
                 {"agent", c.agent},
                 {"question", c.question},
                 {"toolset", toolset_json(c.trajectory.toolset)},
                 {"trajectory", render(c.trajectory)},
                 {"refined", nullptr},
                 {"error", c.error ? json(*c.error) : json(nullptr)}};
        if (c.refined) {
            json items = json::array();
            for (const auto& it : c.refined->items) {
                items.push_back({{"source", source_label(it.evidence.source)},
                                 {"text", it.evidence.text},
                                 {"round_index", it.evidence.round_index},
                                 {"rank", it.evidence.rank},
                                 {"score", it.score},
                                 {"step", it.step == RefineStep::Local ? "local" : "global"}});
            }
            rec["refined"] = {{"side", c.refined->source_agent == AgentSide::Local ? "local" : "web"},
                              {"items", items}};
        }
        out << rec.dump() << '\n';
    }
    out.flush();
    if (!out) throw StorageFailure("write failed: " + path.string());
}

PlannerTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageFailure("cannot read trace " + path.string());
    PlannerTrace trace;
    bool have_planner = false;
    std::string line;
    try {
        while (std::getline(in, line)) {
            if (text::is_blank(line)) continue;
            json rec = json::parse(line);
            const std::string type = rec.at("type").get<std::string>();
            if (type == "planner") {
                trace.planner = trajectory_from(rec);
                have_planner = true;
                continue;
            }
            if (type != "child") throw StorageCorrupt("unknown trace record type " + type);
            ChildRollout c;
            c.planner_round = rec.at("planner_round").get<int>();
            c.agent = rec.at("agent").get<std::string>();
            c.question = rec.at("question").get<std::string>();
            c.trajectory = trajectory_from(rec);
            if (!rec.at("error").is_null()) c.error = rec["error"].get<std::string>();
            if (!rec.at("refined").is_null()) {
                RefinedEvidenceSet set;
                set.source_agent = rec["refined"].at("side") == "web" ? AgentSide::Web : AgentSide::Local;
                for (const auto& it : rec["refined"].at("items")) {
                    ScoredEvidence se;
                    auto src = source_from_label(it.at("source").get<std::string>());
                    if (!src) throw StorageCorrupt("unknown evidence source in trace");
                    se.evidence.source = *src;
                    se.evidence.text = it.at("text").get<std::string>();
                    se.evidence.round_index = it.at("round_index").get<int>();
                    se.evidence.rank = it.at("rank").get<int>();
                    se.score = it.at("score").get<double>();
                    se.step = it.at("step") == "global" ? RefineStep::Global : RefineStep::Local;
                    set.items.push_back(std::move(se));
                }
                c.refined = std::move(set);
            }
            trace.children.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw StorageCorrupt("malformed trace " + path.string() + ": " + e.what());
    } catch (const MalformedTrajectory& e) {
        throw StorageCorrupt("malformed trajectory in trace " + path.string() + ": " + e.what());
    }
    if (!have_planner) throw StorageCorrupt("trace has no planner record: " + path.string());
    return trace;
}

}  // namespace strata
