#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/actions.hpp"
#include "webagents/exec_types.hpp"

namespace webagents::exec {

struct ExecContext {
    std::string base_url; // normalized: no trailing slash
    std::optional<std::string> access_token;
    // Tokens for other hosts a program may address with absolute URLs
    // (multi-site tasks). Keyed by "scheme://host:port".
    std::map<std::string, std::string> host_tokens;
    nlohmann::json bindings = nlohmann::json::object(); // name -> JSON value
    std::size_t byte_budget = 8192;
};

ExecContext make_context(std::string base_url, std::optional<std::string> access_token,
                         std::size_t byte_budget = 8192);

// Runs calls strictly in order. Throws UnresolvedReference before any call
// when a {name} reference cannot be satisfied; stops at the first transport
// error, returning the partial results. Returns the results and the updated
// bindings (also written back to ctx).
std::pair<std::vector<HttpResult>, nlohmann::json> execute_program(const actions::ApiProgram& program,
                                                                   ExecContext& ctx);

// Fetches pages starting at 1 until an empty page, a repeated page, a short
// page, or max_pages, and merges the items. Requires call.paginate.
HttpResult paginate(const actions::HttpCall& call, ExecContext& ctx);

} // namespace webagents::exec
