#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace strata {

struct Message {
    std::string role;  // "system", "user", "assistant"
    std::string content;
};

enum class StopReason { StopSequence, EndOfText, Length };

struct Generation {
    std::string text;
    StopReason stop_reason = StopReason::EndOfText;
};

// Returned text never contains a stop sequence except as its suffix.
class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual Generation generate(std::span<const Message> messages, std::span<const std::string> stop_sequences) = 0;
};

// Cuts `text` right after the earliest stop sequence, if any.
Generation apply_stop_sequences(std::string text, std::span<const std::string> stop_sequences);

/// Replays canned generations.
///
/// Scripts are keyed by question (the first user message). The step inside
/// a rollout is recovered from the conversation itself: it equals the number
/// of "</result>" tags already present in the trailing assistant message.
/// This keeps the client stateless, so one instance can serve concurrent
/// rollouts. Lookup tries the exact question, then a whitespace/case
/// normalized form, then the "*" script. Exhausted or missing scripts yield
/// an empty generation.
class ScriptedClient final : public GenerationClient {
public:
    using Scripts = std::map<std::string, std::vector<std::string>>;

    explicit ScriptedClient(Scripts scripts);

    // Called once per generate(); tests use it to inject delays.
    void set_delay_hook(std::function<void()> hook) { delay_hook_ = std::move(hook); }

    Generation generate(std::span<const Message> messages, std::span<const std::string> stop_sequences) override;

    static std::string normalize_key(std::string_view question);

private:
    Scripts scripts_;
    std::map<std::string, std::vector<std::string>> normalized_;
    std::function<void()> delay_hook_;
};

// Script file: {"version": 1, "agents": {"<agent>": {"<question>": [outputs...]}}}
std::map<std::string, ScriptedClient::Scripts> load_script_file(const std::string& path);

struct HttpGenerationOptions {
    std::string url;  // full chat-completions endpoint
    std::string model;
    std::string api_key_env;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{120000};
    int retries = 2;
    std::chrono::milliseconds backoff{500};
};

/// OpenAI-compatible chat completions. A trailing assistant message is sent
/// as a prefix to continue ("continue_final_message"), which is how the
/// rollout resumes after a tool result is appended.
class HttpGenerationClient final : public GenerationClient {
public:
    explicit HttpGenerationClient(HttpGenerationOptions options);

    Generation generate(std::span<const Message> messages, std::span<const std::string> stop_sequences) override;

    nlohmann::json request_body(std::span<const Message> messages, std::span<const std::string> stop_sequences) const;

private:
    HttpGenerationOptions options_;
};

}  // namespace strata
