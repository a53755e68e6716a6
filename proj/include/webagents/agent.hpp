#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/backend.hpp"
#include "webagents/catalog.hpp"
#include "webagents/simsite.hpp"
#include "webagents/task.hpp"

namespace webagents::agent {

using nlohmann::json;

enum class Variant { browsing, api_based, hybrid };

const char* to_string(Variant variant);
Variant variant_from_string(std::string_view text);

struct PriceRates {
    double input_per_token = 2e-6;
    double output_per_token = 6e-6;
};

// One fixture site as the agent sees it.
struct SiteHandle {
    std::string site_id;
    std::string base_url;
    std::string username;
    std::string access_token;
    std::shared_ptr<sim::Site> site; // in-process pages + snapshots
    std::shared_ptr<const catalog::ApiCatalog> api_catalog; // null for browsing-only runs
};

struct AgentConfig {
    Variant variant = Variant::api_based;
    int step_budget = 15;
    LlmBackend* backend = nullptr;
    std::vector<SiteHandle> sites;
    std::size_t byte_budget = 8192;
    int viewport_height = 40;
    std::string prompts_dir; // directory holding the prompt template segments
    PriceRates rates;
};

struct Step {
    int index = 0; // 1-based
    std::string prompt_digest;
    std::string raw_turn;
    json action;      // parsed action (or parse-error record)
    json exec;        // structured execution record
    std::string observation;
    long wall_ms = 0; // 0 under the scripted backend so reruns are byte-equal
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
};

struct Trajectory {
    std::string task_id;
    Variant variant = Variant::api_based;
    int step_budget = 15;
    std::string backend_kind;
    std::vector<std::string> site_ids;
    std::map<std::string, std::string> base_urls;
    std::string start_url;

    std::vector<Step> steps;
    std::string terminal; // finished | budget_exhausted | exited
    std::optional<std::string> answer;
    std::optional<std::string> error;
    std::string final_url;
    json final_snapshot = json::object(); // site_id -> snapshot
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
    double cost_estimate = 0.0;
    json eval = json(); // filled in by the harness after evaluation

    std::size_t steps_used() const { return steps.size(); }
};

std::string build_system_prompt(const AgentConfig& cfg);
std::string build_initial_user_prompt(const AgentConfig& cfg, const eval::TaskSpec& task);

// The step loop: assemble messages, query the backend, parse the turn,
// dispatch, append history; stops at Finish/Exit or when the budget runs out.
Trajectory run(const AgentConfig& cfg, const eval::TaskSpec& task);

double estimate_cost(const Trajectory& traj, const PriceRates& rates);

// JSON Lines persistence: one header line, one line per step, one terminal
// line. Byte-stable for byte-stable inputs.
std::string trajectory_to_jsonl(const Trajectory& traj);
Trajectory trajectory_from_jsonl(const std::string& text); // throws SchemaError

} // namespace webagents::agent
