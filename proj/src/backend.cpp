#include "webagents/backend.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::agent {

using nlohmann::json;

ScriptedBackend::ScriptedBackend(std::vector<std::string> turns)
    : queue_(turns.begin(), turns.end()) {}

ModelTurn ScriptedBackend::complete(const std::vector<ChatMessage>& messages) {
    requests_.push_back(messages);
    if (queue_.empty()) {
        throw BackendError("scripted backend exhausted after " + std::to_string(consumed_) +
                           " turn(s)");
    }
    ModelTurn turn;
    turn.text = queue_.front();
    queue_.pop_front();
    ++consumed_;
    for (const auto& m : messages) {
        turn.tokens_in += whitespace_tokens(m.content);
    }
    turn.tokens_out = whitespace_tokens(turn.text);
    return turn;
}

HttpBackend::HttpBackend(std::string endpoint_url, std::string model, std::string api_key)
    : endpoint_url_(std::move(endpoint_url)), model_(std::move(model)),
      api_key_(std::move(api_key)) {}

ModelTurn HttpBackend::complete(const std::vector<ChatMessage>& messages) {
    // Split "http://host:port/path" into client root and request path.
    std::size_t scheme = endpoint_url_.find("://");
    if (scheme == std::string::npos) {
        throw BackendError("backend endpoint must be an absolute URL: " + endpoint_url_);
    }
    std::size_t path_pos = endpoint_url_.find('/', scheme + 3);
    std::string root = path_pos == std::string::npos ? endpoint_url_
                                                     : endpoint_url_.substr(0, path_pos);
    std::string path = path_pos == std::string::npos ? "/" : endpoint_url_.substr(path_pos);

    json body;
    body["model"] = model_;
    body["messages"] = json::array();
    for (const auto& m : messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }

    httplib::Client client(root);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError("backend request failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("backend returned HTTP " + std::to_string(res->status));
    }

    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
        throw BackendError("backend reply is not a chat completion");
    }

    ModelTurn turn;
    turn.text = reply["choices"][0].value("message", json::object()).value("content", "");
    if (reply.contains("usage")) {
        turn.tokens_in = reply["usage"].value("prompt_tokens", 0);
        turn.tokens_out = reply["usage"].value("completion_tokens", 0);
    }
    return turn;
}

} // namespace webagents::agent
