#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strata/agent.hpp"
#include "strata/embedding.hpp"
#include "strata/eval.hpp"
#include "strata/refiner.hpp"

namespace strata {

// A low-level agent the planner can call: its config, its tools and the
// endpoint it generates with.
struct LowLevelAgent {
    AgentConfig config;
    std::shared_ptr<const ToolRegistry> tools;
    std::shared_ptr<GenerationClient> client;
};

struct ChildRollout {
    int planner_round = 0;  // 1-based index of the planner tool call that spawned it
    std::string agent;      // "local" or "web"
    std::string question;
    ParsedTrajectory trajectory;  // partial when `error` is set
    std::optional<RefinedEvidenceSet> refined;
    std::optional<std::string> error;
};

struct PlannerTrace {
    ParsedTrajectory planner;
    // Ordered by (planner_round, local before web).
    std::vector<ChildRollout> children;
};

struct PlannerAnswer {
    std::optional<std::string> answer;
    PlannerTrace trace;
};

// Planner generation failed; `trace` holds everything up to the failure.
class PlannerAborted : public ClientFailure {
public:
    PlannerAborted(const std::string& what, PlannerTrace t) : ClientFailure(what), trace(std::move(t)) {}
    PlannerTrace trace;
};

struct PlannerDeps {
    AgentConfig planner;
    std::shared_ptr<GenerationClient> planner_client;
    LowLevelAgent local;
    LowLevelAgent web;
    RefinerConfig refiner;
    std::shared_ptr<const EmbeddingProvider> embedder;
};

/// High-level agent. Wraps the local and web agents as the tools
/// local_search_agent, web_search_agent and all_search_agent, and only ever
/// hands refined evidence back to the planner rollout.
class Planner {
public:
    explicit Planner(PlannerDeps deps);

    PlannerAnswer answer(std::string_view question) const;

    // Tool bodies. Children spawned by the call are appended to `sink` when
    // given. Failures come back as "ERROR: ..." lines, never as exceptions.
    std::string local_search_agent_tool(std::string_view question, int planner_round = 0,
                                        std::vector<ChildRollout>* sink = nullptr) const;
    std::string web_search_agent_tool(std::string_view question, int planner_round = 0,
                                      std::vector<ChildRollout>* sink = nullptr) const;
    std::string all_search_agent_tool(std::string_view question, int planner_round = 0,
                                      std::vector<ChildRollout>* sink = nullptr) const;

    const PlannerDeps& deps() const { return deps_; }

private:
    PlannerDeps deps_;
};

// Result text a planner tool call returns for the given children, rebuilt
// from their refined sets and errors.
std::string render_tool_result(const std::vector<const ChildRollout*>& children);

// Sum over child rollouts plus the planner trajectory itself.
SearchCounts count_searches(const PlannerTrace& trace);

// Child think/answer lines that show up in a planner result payload without
// being part of any child evidence. Empty means the trace is clean.
std::vector<std::string> audit_copying(const PlannerTrace& trace);

// Planner result payloads that do not match render_tool_result of the
// children recorded for that round.
std::vector<std::string> audit_results(const PlannerTrace& trace);

// Line-delimited trace records: one "planner" record followed by one
// "child" record per child rollout.
void save_trace(const PlannerTrace& trace, const std::filesystem::path& path);
PlannerTrace load_trace(const std::filesystem::path& path);

}  // namespace strata
