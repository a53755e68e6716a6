#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace webagents::eval {

using nlohmann::json;

// Answer checking: the Finish answer is trimmed and case-folded, then
// compared per mode.
struct AnswerMatch {
    std::string mode = "exact"; // exact | contains | any_of
    std::string expected;
    std::vector<std::string> any_of;
};

// One assertion over the final snapshot. Supported ops:
//   equals       value at `path` equals `value`
//   count_equals array at `path` has `count` elements
//   count_where  array at `path` has `count` elements whose `field` compares
//                (`cmp` in {eq, ne, le, ge, contains}) against `value`
//   exists / absent  the pointer resolves / does not resolve
struct StateAssertion {
    std::string op = "equals";
    std::string path; // RFC 6901 pointer into the composite snapshot
    json value;
    std::string field;
    std::string cmp = "eq";
    long long count = 0;
};

struct StateCheck {
    std::vector<StateAssertion> assertions;
};

// The expected URL is base_url(site) joined with path, then normalized.
struct UrlMatch {
    std::string site;
    std::string path;
    std::string match = "exact"; // exact | prefix
};

using Evaluator = std::variant<AnswerMatch, StateCheck, UrlMatch>;

struct TaskSpec {
    std::string task_id;
    std::vector<std::string> site_ids; // first entry is the primary site
    std::string intent;
    Evaluator evaluator;
    std::optional<bool> api_solvable; // operator label used by error triage
    std::string start_path = "/";     // where the browser opens
};

TaskSpec task_from_json(const json& j);
json task_to_json(const TaskSpec& task);
std::vector<TaskSpec> load_tasks(const std::string& path);

} // namespace webagents::eval
