#include "strata/generation.hpp"

#include <fstream>
#include <thread>

#include "strata/errors.hpp"
#include "strata/net.hpp"
#include "strata/text.hpp"

namespace strata {

Generation apply_stop_sequences(std::string text, std::span<const std::string> stop_sequences) {
    std::size_t best = std::string::npos;
    std::size_t best_len = 0;
    for (const auto& stop : stop_sequences) {
        if (stop.empty()) continue;
        std::size_t at = text.find(stop);
        if (at != std::string::npos && (best == std::string::npos || at < best)) {
            best = at;
            best_len = stop.size();
        }
    }
    if (best == std::string::npos) return {std::move(text), StopReason::EndOfText};
    text.resize(best + best_len);
    return {std::move(text), StopReason::StopSequence};
}

// ---------------------------------------------------------------------------

ScriptedClient::ScriptedClient(Scripts scripts) : scripts_(std::move(scripts)) {
    for (const auto& [q, outs] : scripts_) normalized_.emplace(normalize_key(q), outs);
}

std::string ScriptedClient::normalize_key(std::string_view question) {
    return text::join(text::whitespace_tokens(text::to_lower_ascii(question)), " ");
}

Generation ScriptedClient::generate(std::span<const Message> messages, std::span<const std::string> stop_sequences) {
    if (delay_hook_) delay_hook_();

    std::string question;
    for (const auto& m : messages) {
        if (m.role == "user") {
            question = std::string(text::trim(m.content));
            break;
        }
    }
    std::size_t step = 0;
    if (!messages.empty() && messages.back().role == "assistant") {
        const std::string& prefix = messages.back().content;
        for (std::size_t at = prefix.find("</result>"); at != std::string::npos;
             at = prefix.find("</result>", at + 1)) {
            ++step;
        }
    }

    const std::vector<std::string>* script = nullptr;
    if (auto it = scripts_.find(question); it != scripts_.end()) {
        script = &it->second;
    } else if (auto nit = normalized_.find(normalize_key(question)); nit != normalized_.end()) {
        script = &nit->second;
    } else if (auto star = scripts_.find("*"); star != scripts_.end()) {
        script = &star->second;
    }
    if (script == nullptr || step >= script->size()) return {"", StopReason::EndOfText};
    return apply_stop_sequences((*script)[step], stop_sequences);
}

std::map<std::string, ScriptedClient::Scripts> load_script_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open script file: " + path);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("agents")) throw ConfigError("malformed script file: " + path);
    std::map<std::string, ScriptedClient::Scripts> out;
    for (const auto& [agent, scripts] : doc["agents"].items()) {
        ScriptedClient::Scripts s;
        for (const auto& [question, outputs] : scripts.items()) s[question] = outputs.get<std::vector<std::string>>();
        out[agent] = std::move(s);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

bool is_retryable(int status) {
    return status == 429 || status >= 500;
}

// When the server strips the matched stop string, restore the closing tag of
// the last unclosed tag if that closing tag is one of our stop sequences.
std::string restore_stop(std::string text, std::span<const std::string> stops, const nlohmann::json& choice) {
    if (choice.contains("stop_reason") && choice["stop_reason"].is_string()) {
        std::string matched = choice["stop_reason"].get<std::string>();
        for (const auto& s : stops) {
            if (s == matched) return text + matched;
        }
    }
    std::size_t best_pos = std::string::npos;
    const std::string* best = nullptr;
    for (const auto& s : stops) {
        if (s.size() < 4 || s.compare(0, 2, "</") != 0) continue;
        std::string open = "<" + s.substr(2);
        std::size_t at = text.rfind(open);
        if (at == std::string::npos) continue;
        if (text.find(s, at) != std::string::npos) continue;
        if (best_pos == std::string::npos || at > best_pos) {
            best_pos = at;
            best = &s;
        }
    }
    if (best != nullptr) text += *best;
    return text;
}

}  // namespace

HttpGenerationClient::HttpGenerationClient(HttpGenerationOptions options) : options_(std::move(options)) {
    if (!net::parse_url(options_.url)) throw ConfigError("invalid generation endpoint URL: " + options_.url);
}

nlohmann::json HttpGenerationClient::request_body(std::span<const Message> messages,
                                                  std::span<const std::string> stop_sequences) const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    const bool continuing = !messages.empty() && messages.back().role == "assistant";
    nlohmann::json body{
        {"model", options_.model},
        {"messages", msgs},
        {"stop", std::vector<std::string>(stop_sequences.begin(), stop_sequences.end())},
        {"temperature", options_.temperature},
        {"top_p", options_.top_p},
        {"max_tokens", options_.max_tokens},
    };
    if (continuing) {
        body["continue_final_message"] = true;
        body["add_generation_prompt"] = false;
    }
    return body;
}

Generation HttpGenerationClient::generate(std::span<const Message> messages,
                                          std::span<const std::string> stop_sequences) {
    const std::string payload = request_body(messages, stop_sequences).dump();
    net::Headers headers;
    if (auto key = net::env(options_.api_key_env)) headers.emplace_back("Authorization", "Bearer " + *key);

    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(options_.backoff * (1 << (attempt - 1)));
        net::HttpResponse res;
        try {
            res = net::post_json(options_.url, payload, headers, options_.timeout);
        } catch (const Error& e) {
            last_error = e.what();
            continue;
        }
        if (res.status != 200) {
            last_error = "HTTP " + std::to_string(res.status);
            if (is_retryable(res.status)) continue;
            break;
        }
        auto body = nlohmann::json::parse(res.body, nullptr, false);
        if (body.is_discarded() || !body.contains("choices") || body["choices"].empty()) {
            last_error = "malformed completion response";
            continue;
        }
        const auto& choice = body["choices"][0];
        std::string content;
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
            content = choice["message"]["content"].get<std::string>();
        } else if (choice.contains("text") && choice["text"].is_string()) {
            content = choice["text"].get<std::string>();
        }
        const std::string finish = choice.value("finish_reason", std::string{});
        if (finish == "length") {
            Generation g = apply_stop_sequences(std::move(content), stop_sequences);
            if (g.stop_reason != StopReason::StopSequence) g.stop_reason = StopReason::Length;
            return g;
        }
        return apply_stop_sequences(restore_stop(std::move(content), stop_sequences, choice), stop_sequences);
    }
    throw ClientFailure("generation endpoint failed after " + std::to_string(options_.retries + 1) +
                        " attempts: " + last_error);
}

}  // namespace strata
