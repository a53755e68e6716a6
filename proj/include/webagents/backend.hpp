#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace webagents::agent {

struct ChatMessage {
    std::string role; // "system" | "user" | "assistant"
    std::string content;
};

struct ModelTurn {
    std::string text;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
};

// Pluggable model backend. Implementations must be deterministic when
// constructed from the same script (scripted) or are as deterministic as the
// remote provider allows (http).
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual ModelTurn complete(const std::vector<ChatMessage>& messages) = 0;
    virtual std::string kind() const = 0;
};

// Replays a fixed queue of canned turns. Token counts use whitespace-delimited
// word counts of the exchanged text.
class ScriptedBackend final : public LlmBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> turns);

    ModelTurn complete(const std::vector<ChatMessage>& messages) override;
    std::string kind() const override { return "scripted"; }

    std::size_t turns_consumed() const { return consumed_; }
    std::size_t turns_remaining() const { return queue_.size(); }

    // Full request log, for prompt-content assertions in tests.
    const std::vector<std::vector<ChatMessage>>& requests() const { return requests_; }

private:
    std::deque<std::string> queue_;
    std::size_t consumed_ = 0;
    std::vector<std::vector<ChatMessage>> requests_;
};

// Talks to a chat-completions style endpoint:
//   POST {endpoint}  body {"model": ..., "messages": [{"role","content"}...]}
//   reply read from choices[0].message.content, usage from usage.*_tokens.
class HttpBackend final : public LlmBackend {
public:
    HttpBackend(std::string endpoint_url, std::string model, std::string api_key);

    ModelTurn complete(const std::vector<ChatMessage>& messages) override;
    std::string kind() const override { return "http"; }

private:
    std::string endpoint_url_;
    std::string model_;
    std::string api_key_;
};

} // namespace webagents::agent
