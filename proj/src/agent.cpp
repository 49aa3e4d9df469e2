#include "strata/agent.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "strata/local_store.hpp"
#include "strata/text.hpp"
#include "strata/web.hpp"

namespace strata {

namespace tools {

Toolset local_toolset() {
    return {std::string(kChunkSearch), std::string(kGraphSearch), std::string(kAdjacentPassages)};
}

Toolset web_toolset() {
    return {std::string(kWebSearch), std::string(kBrowseUrl)};
}

Toolset planner_toolset() {
    return {std::string(kLocalAgent), std::string(kWebAgent), std::string(kAllAgents)};
}

}  // namespace tools

AgentConfig AgentConfig::make(std::string name, std::string system_prompt, Toolset toolset, int round_limit) {
    AgentConfig c;
    c.name = std::move(name);
    c.system_prompt = std::move(system_prompt);
    c.toolset = std::move(toolset);
    c.round_limit = round_limit;
    for (const auto& t : c.toolset) c.stop_sequences.push_back("</" + t + ">");
    c.stop_sequences.emplace_back("</answer>");
    return c;
}

void AgentConfig::validate() const {
    if (round_limit < 1) throw ConfigError(name + ": round_limit must be at least 1");
    auto has = [&](const std::string& s) {
        return std::find(stop_sequences.begin(), stop_sequences.end(), s) != stop_sequences.end();
    };
    for (const auto& t : toolset) {
        if (!has("</" + t + ">")) throw ConfigError(name + ": stop sequences lack </" + t + ">");
    }
    if (!has("</answer>")) throw ConfigError(name + ": stop sequences lack </answer>");
}

std::string load_prompt(const std::filesystem::path& dir, std::string_view agent_name) {
    auto path = dir / (std::string(agent_name) + ".txt");
    std::ifstream in(path);
    if (!in) throw ConfigError("missing prompt asset: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ToolRegistry::add(std::string name, ToolHandler handler) {
    handlers_[std::move(name)] = std::move(handler);
}

bool ToolRegistry::contains(std::string_view name) const {
    return handlers_.find(name) != handlers_.end();
}

const ToolHandler& ToolRegistry::at(std::string_view name) const {
    auto it = handlers_.find(name);
    if (it == handlers_.end()) throw UnknownTool(std::string(name));
    return it->second;
}

Toolset ToolRegistry::names() const {
    Toolset out;
    for (const auto& [name, _] : handlers_) out.insert(name);
    return out;
}

std::string dispatch_tool(std::string_view tool_name, std::string_view payload, const ToolRegistry& registry) {
    const ToolHandler& handler = registry.at(tool_name);
    try {
        return handler(payload);
    } catch (const std::exception& e) {
        return std::string("ERROR: ") + e.what();
    } catch (...) {
        return "ERROR: unknown failure";
    }
}

namespace {

// Drops an unfinished trailing block so a rollout cut off mid-generation
// still yields a trajectory; the leftover shows up as stray text.
ParsedTrajectory parse_rollout(const std::string& text, const Toolset& toolset) {
    try {
        return parse(text, toolset);
    } catch (const MalformedTrajectory&) {
        std::size_t cut = text.size();
        while (cut > 0) {
            cut = text.rfind('<', cut - 1);
            if (cut == std::string::npos) break;
            try {
                ParsedTrajectory t = parse(std::string_view(text).substr(0, cut), toolset);
                t.stray_text.emplace_back(text::trim(std::string_view(text).substr(cut)));
                return t;
            } catch (const MalformedTrajectory&) {
            }
            if (cut == 0) break;
        }
        throw;
    }
}

}  // namespace

ParsedTrajectory run_agent(const AgentConfig& config, std::string_view question, const ToolRegistry& registry,
                           GenerationClient& client) {
    config.validate();
    for (const auto& t : config.toolset) {
        if (!registry.contains(t)) throw ConfigError(config.name + ": no handler registered for " + t);
    }

    std::string text;
    int dispatched = 0;
    while (true) {
        std::vector<Message> messages{{"system", config.system_prompt}, {"user", std::string(question)}};
        if (!text.empty()) messages.push_back({"assistant", text});

        Generation gen;
        try {
            gen = client.generate(messages, config.stop_sequences);
        } catch (const ClientFailure& e) {
            throw RolloutAborted(config.name + ": " + e.what(), text);
        }
        text += gen.text;

        if (auto call = detect_pending_call(text, config.toolset)) {
            std::string result = dispatch_tool(call->tool_name, call->payload, registry);
            text += "<result>\n";
            text += result;
            text += "\n</result>\n";
            if (++dispatched >= config.round_limit) break;
            continue;
        }
        break;
    }

    ParsedTrajectory out = parse_rollout(text, config.toolset);
    out.question = std::string(text::trim(question));
    return out;
}

std::optional<std::string> extract_answer(const ParsedTrajectory& trajectory) {
    for (auto it = trajectory.segments.rbegin(); it != trajectory.segments.rend(); ++it) {
        if (it->kind == SegmentKind::Answer) return std::string(text::trim(it->payload));
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------

void register_local_tools(ToolRegistry& registry, std::shared_ptr<const LocalStore> store, RetrievalDepth depth) {
    registry.add(std::string(tools::kChunkSearch), [store, depth](std::string_view q) {
        std::vector<std::pair<EvidenceSource, std::string>> items;
        for (auto& hit : store->chunk_search(text::trim(q), depth.chunk_k)) {
            items.emplace_back(EvidenceSource::LocalChunk, std::move(hit.chunk.text));
        }
        return format_evidence_list(items);
    });
    registry.add(std::string(tools::kGraphSearch), [store, depth](std::string_view q) {
        std::vector<std::pair<EvidenceSource, std::string>> items;
        for (const auto& hit : store->graph_search(text::trim(q), depth.graph_k)) {
            items.emplace_back(EvidenceSource::LocalGraph,
                               format_triple_text(hit.triple.subject, hit.triple.predicate, hit.triple.object));
        }
        return format_evidence_list(items);
    });
    registry.add(std::string(tools::kAdjacentPassages), [store, depth](std::string_view entity) {
        if (text::is_blank(entity)) throw EmptyQuery();
        std::vector<std::pair<EvidenceSource, std::string>> items;
        for (auto& chunk : store->get_adjacent_passages(entity, depth.adjacent_k)) {
            items.emplace_back(EvidenceSource::LocalAdjacent, std::move(chunk.text));
        }
        return format_evidence_list(items);
    });
}

void register_web_tools(ToolRegistry& registry, std::shared_ptr<const SearchProvider> search,
                        std::shared_ptr<const PageFetcher> fetcher, std::shared_ptr<const EmbeddingProvider> embedder,
                        RetrievalDepth depth) {
    registry.add(std::string(tools::kWebSearch), [search, depth](std::string_view q) {
        std::vector<std::pair<EvidenceSource, std::string>> items;
        for (const auto& hit : web_search(q, depth.web_k, *search)) {
            std::string body = text::join(text::whitespace_tokens(hit.title), " ") + " | " + hit.url;
            if (!text::is_blank(hit.snippet)) body += "\n" + text::join(text::whitespace_tokens(hit.snippet), " ");
            items.emplace_back(EvidenceSource::WebSearch, std::move(body));
        }
        return format_evidence_list(items);
    });
    registry.add(std::string(tools::kBrowseUrl), [fetcher, embedder, depth](std::string_view payload) {
        BrowseRequest req = parse_browse_payload(payload);
        std::vector<std::pair<EvidenceSource, std::string>> items;
        for (auto& piece : browse_url(req.url, req.question, depth.browse_k, *fetcher, *embedder, depth.piece_tokens)) {
            items.emplace_back(EvidenceSource::WebPage, std::move(piece.piece));
        }
        return format_evidence_list(items);
    });
}

}  // namespace strata
