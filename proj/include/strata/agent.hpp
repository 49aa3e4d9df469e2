#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "strata/errors.hpp"
#include "strata/generation.hpp"
#include "strata/trajectory.hpp"

namespace strata {

class LocalStore;
class SearchProvider;
class PageFetcher;
class EmbeddingProvider;

namespace tools {
inline constexpr std::string_view kChunkSearch = "chunk_search";
inline constexpr std::string_view kGraphSearch = "graph_search";
inline constexpr std::string_view kAdjacentPassages = "get_adjacent_passages";
inline constexpr std::string_view kWebSearch = "web_search";
inline constexpr std::string_view kBrowseUrl = "browse_url";
inline constexpr std::string_view kLocalAgent = "local_search_agent";
inline constexpr std::string_view kWebAgent = "web_search_agent";
inline constexpr std::string_view kAllAgents = "all_search_agent";

Toolset local_toolset();
Toolset web_toolset();
Toolset planner_toolset();
}  // namespace tools

struct AgentConfig {
    std::string name;
    std::string system_prompt;
    Toolset toolset;
    int round_limit = 8;
    std::vector<std::string> stop_sequences;

    // Stop sequences are the closing tag of every tool plus "</answer>".
    static AgentConfig make(std::string name, std::string system_prompt, Toolset toolset, int round_limit);
    // Throws ConfigError when a required stop sequence is missing or round_limit < 1.
    void validate() const;
};

// Prompt assets live at <dir>/<agent name>.txt.
std::string load_prompt(const std::filesystem::path& dir, std::string_view agent_name);

using ToolHandler = std::function<std::string(std::string_view payload)>;

class ToolRegistry {
public:
    void add(std::string name, ToolHandler handler);
    bool contains(std::string_view name) const;
    const ToolHandler& at(std::string_view name) const;
    Toolset names() const;

private:
    std::map<std::string, ToolHandler, std::less<>> handlers_;
};

// Handler output, or "ERROR: <message>" when the handler throws.
// UnknownTool for names the registry does not hold.
std::string dispatch_tool(std::string_view tool_name, std::string_view payload, const ToolRegistry& registry);

// Thrown when the generation endpoint fails mid-rollout; carries the text
// generated so far (including appended results).
class RolloutAborted : public ClientFailure {
public:
    RolloutAborted(const std::string& what, std::string partial) : ClientFailure(what), partial_text(std::move(partial)) {}
    std::string partial_text;
};

/// Tool-augmented rollout.
///
/// Generates until a stop sequence, dispatches a pending tool call and
/// appends "<result>\n...\n</result>\n", and repeats. Stops on "</answer>",
/// after `round_limit` dispatched tool calls, or when a generation ends
/// without either.
ParsedTrajectory run_agent(const AgentConfig& config, std::string_view question, const ToolRegistry& registry,
                           GenerationClient& client);

// Trimmed payload of the answer segment, if any.
std::optional<std::string> extract_answer(const ParsedTrajectory& trajectory);

struct RetrievalDepth {
    int chunk_k = 5;
    int graph_k = 5;
    int adjacent_k = 5;
    int web_k = 5;
    int browse_k = 3;
    int piece_tokens = 200;
};

void register_local_tools(ToolRegistry& registry, std::shared_ptr<const LocalStore> store, RetrievalDepth depth = {});
void register_web_tools(ToolRegistry& registry, std::shared_ptr<const SearchProvider> search,
                        std::shared_ptr<const PageFetcher> fetcher, std::shared_ptr<const EmbeddingProvider> embedder,
                        RetrievalDepth depth = {});

}  // namespace strata
