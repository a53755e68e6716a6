#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/agent.hpp"
#include "webagents/task.hpp"

namespace webagents::eval {

enum class ActionClass { browsing_only, api_only, browsing_and_api, none };
enum class ErrorCategory { correct, unsolvable_with_api, task_misunderstanding, api_call_error, other };

const char* to_string(ActionClass c);
const char* to_string(ErrorCategory c);

struct EvalResult {
    std::string task_id;
    bool pass = false;
    std::string mode;    // answer | state | url
    std::string details; // which assertion or comparison failed
    ActionClass action_class = ActionClass::none;
    ErrorCategory error_category = ErrorCategory::other;
};

json eval_result_to_json(const EvalResult& r);
EvalResult eval_result_from_json(const json& j);

// Three-mode verdict. Throws MissingInput when a StateCheck task has no
// snapshot or a UrlMatch task has no final URL.
EvalResult evaluate(const agent::Trajectory& traj, const TaskSpec& task,
                    const json& final_snapshot, const std::optional<std::string>& final_url);

// Based on executed (not rejected) actions; DocLookup counts as API.
ActionClass classify_actions(const agent::Trajectory& traj);

// Triage for failed tasks: label, then call errors, then wrong answers.
ErrorCategory categorize_error(const agent::Trajectory& traj, const TaskSpec& task);

std::string normalize_answer(std::string_view answer);

struct ClassStats {
    std::size_t tasks = 0;
    std::size_t passed = 0;
    double frequency = 0.0;
    double accuracy = 0.0;
};

struct GroupReport {
    std::size_t tasks = 0;
    std::size_t passed = 0;
    double success_rate = 0.0;
    double mean_steps = 0.0;
    double mean_cost = 0.0;
    std::map<std::string, ClassStats> action_classes;  // keyed by class name
    std::map<std::string, std::size_t> error_categories;
    double mean_api_calls_passing_api_solvable = 0.0;
    std::size_t passing_api_solvable = 0;
};

struct Report {
    GroupReport overall;
    std::map<std::string, GroupReport> per_site;
};

// Results and trajectories must align by task_id (throws MisalignedInputs).
Report aggregate(const std::vector<EvalResult>& results,
                 const std::vector<agent::Trajectory>& trajs);

json report_to_json(const Report& report);
std::string report_to_text(const Report& report);

} // namespace webagents::eval
