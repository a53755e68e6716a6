#include "webagents/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::eval {

// ---- task (de)serialization ----

namespace {

Evaluator evaluator_from_json(const json& j) {
    std::string type = j.value("type", "");
    if (type == "answer_match") {
        AnswerMatch m;
        m.mode = j.value("mode", "exact");
        m.expected = j.value("expected", "");
        if (j.contains("any_of")) m.any_of = j["any_of"].get<std::vector<std::string>>();
        return m;
    }
    if (type == "state_check") {
        StateCheck c;
        for (const auto& a : j.value("assertions", json::array())) {
            StateAssertion assertion;
            assertion.op = a.value("op", "equals");
            assertion.path = a.value("path", "");
            assertion.value = a.value("value", json());
            assertion.field = a.value("field", "");
            assertion.cmp = a.value("cmp", "eq");
            assertion.count = a.value("count", 0LL);
            c.assertions.push_back(std::move(assertion));
        }
        return c;
    }
    if (type == "url_match") {
        UrlMatch m;
        m.site = j.value("site", "");
        m.path = j.value("path", "");
        m.match = j.value("match", "exact");
        return m;
    }
    throw SchemaError("unknown evaluator type: '" + type + "'");
}

json evaluator_to_json(const Evaluator& evaluator) {
    if (const auto* m = std::get_if<AnswerMatch>(&evaluator)) {
        json j{{"type", "answer_match"}, {"mode", m->mode}};
        if (!m->expected.empty() || m->mode != "any_of") j["expected"] = m->expected;
        if (!m->any_of.empty()) j["any_of"] = m->any_of;
        return j;
    }
    if (const auto* c = std::get_if<StateCheck>(&evaluator)) {
        json assertions = json::array();
        for (const auto& a : c->assertions) {
            json aj{{"op", a.op}, {"path", a.path}};
            if (!a.value.is_null()) aj["value"] = a.value;
            if (!a.field.empty()) aj["field"] = a.field;
            if (a.cmp != "eq") aj["cmp"] = a.cmp;
            if (a.op.rfind("count", 0) == 0) aj["count"] = a.count;
            assertions.push_back(std::move(aj));
        }
        return json{{"type", "state_check"}, {"assertions", assertions}};
    }
    const auto& m = std::get<UrlMatch>(evaluator);
    return json{{"type", "url_match"}, {"site", m.site}, {"path", m.path}, {"match", m.match}};
}

} // namespace

TaskSpec task_from_json(const json& j) {
    TaskSpec task;
    task.task_id = j.at("task_id").get<std::string>();
    task.site_ids = j.at("site_ids").get<std::vector<std::string>>();
    task.intent = j.value("intent", "");
    task.evaluator = evaluator_from_json(j.at("evaluator"));
    if (j.contains("labels") && j["labels"].contains("api_solvable")) {
        task.api_solvable = j["labels"]["api_solvable"].get<bool>();
    }
    task.start_path = j.value("start_path", "/");
    return task;
}

json task_to_json(const TaskSpec& task) {
    json j{{"task_id", task.task_id},
           {"site_ids", task.site_ids},
           {"intent", task.intent},
           {"evaluator", evaluator_to_json(task.evaluator)},
           {"start_path", task.start_path}};
    if (task.api_solvable) j["labels"] = json{{"api_solvable", *task.api_solvable}};
    return j;
}

std::vector<TaskSpec> load_tasks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read task corpus: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
        throw SchemaError("task corpus must be a JSON array: " + path);
    }
    std::vector<TaskSpec> tasks;
    for (const auto& j : doc) tasks.push_back(task_from_json(j));
    return tasks;
}

// ---- evaluation ----

const char* to_string(ActionClass c) {
    switch (c) {
    case ActionClass::browsing_only: return "browsing_only";
    case ActionClass::api_only: return "api_only";
    case ActionClass::browsing_and_api: return "browsing_and_api";
    case ActionClass::none: return "none";
    }
    return "none";
}

const char* to_string(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::correct: return "correct";
    case ErrorCategory::unsolvable_with_api: return "unsolvable_with_api";
    case ErrorCategory::task_misunderstanding: return "task_misunderstanding";
    case ErrorCategory::api_call_error: return "api_call_error";
    case ErrorCategory::other: return "other";
    }
    return "other";
}

std::string normalize_answer(std::string_view answer) {
    return to_lower(trim(answer));
}

namespace {

std::pair<bool, std::string> check_answer(const agent::Trajectory& traj, const AnswerMatch& m) {
    if (traj.terminal != "finished" || !traj.answer) {
        return {false, "no Finish answer was produced (terminal=" + traj.terminal + ")"};
    }
    std::string got = normalize_answer(*traj.answer);
    if (m.mode == "exact") {
        std::string want = normalize_answer(m.expected);
        if (got == want) return {true, ""};
        return {false, "expected '" + want + "', got '" + got + "'"};
    }
    if (m.mode == "contains") {
        std::string want = normalize_answer(m.expected);
        if (!want.empty() && got.find(want) != std::string::npos) return {true, ""};
        return {false, "answer does not contain '" + want + "'"};
    }
    if (m.mode == "any_of") {
        for (const auto& alt : m.any_of) {
            if (got == normalize_answer(alt)) return {true, ""};
        }
        return {false, "answer matches none of the " + std::to_string(m.any_of.size()) +
                           " accepted values"};
    }
    return {false, "unknown answer-match mode '" + m.mode + "'"};
}

bool compare_field(const json& item, const StateAssertion& a) {
    if (!item.is_object() || !item.contains(a.field)) return false;
    const json& v = item.at(a.field);
    if (a.cmp == "eq") return v == a.value;
    if (a.cmp == "ne") return v != a.value;
    if (a.cmp == "le") return v.is_number() && a.value.is_number() &&
                              v.get<double>() <= a.value.get<double>();
    if (a.cmp == "ge") return v.is_number() && a.value.is_number() &&
                              v.get<double>() >= a.value.get<double>();
    if (a.cmp == "contains") {
        return v.is_string() && a.value.is_string() &&
               v.get<std::string>().find(a.value.get<std::string>()) != std::string::npos;
    }
    return false;
}

std::pair<bool, std::string> check_assertion(const json& snapshot, const StateAssertion& a) {
    json resolved;
    bool resolvable = true;
    try {
        resolved = snapshot.at(json::json_pointer(a.path));
    } catch (const json::exception&) {
        resolvable = false;
    }

    if (a.op == "exists") {
        return {resolvable, resolvable ? "" : "pointer '" + a.path + "' does not resolve"};
    }
    if (a.op == "absent") {
        return {!resolvable, !resolvable ? "" : "pointer '" + a.path + "' unexpectedly resolves"};
    }
    if (!resolvable) {
        return {false, "pointer '" + a.path + "' does not resolve"};
    }
    if (a.op == "equals") {
        if (resolved == a.value) return {true, ""};
        return {false, "value at '" + a.path + "' is " + resolved.dump() + ", expected " +
                           a.value.dump()};
    }
    if (a.op == "count_equals") {
        if (!resolved.is_array()) return {false, "'" + a.path + "' is not an array"};
        if (static_cast<long long>(resolved.size()) == a.count) return {true, ""};
        return {false, "array at '" + a.path + "' has " + std::to_string(resolved.size()) +
                           " items, expected " + std::to_string(a.count)};
    }
    if (a.op == "count_where") {
        if (!resolved.is_array()) return {false, "'" + a.path + "' is not an array"};
        long long hits = 0;
        for (const auto& item : resolved) {
            if (compare_field(item, a)) ++hits;
        }
        if (hits == a.count) return {true, ""};
        return {false, std::to_string(hits) + " items at '" + a.path + "' match " + a.field +
                           " " + a.cmp + " " + a.value.dump() + ", expected " +
                           std::to_string(a.count)};
    }
    return {false, "unknown assertion op '" + a.op + "'"};
}

} // namespace

ActionClass classify_actions(const agent::Trajectory& traj) {
    bool api = false;
    bool browse = false;
    for (const auto& step : traj.steps) {
        if (!step.exec.is_object()) continue;
        std::string kind = step.exec.value("kind", "");
        if (kind == "api" && step.exec.value("http_calls", 0u) > 0) api = true;
        if (kind == "doc") api = true;
        if (kind == "browse" && step.exec.value("commands", 0u) > 0) browse = true;
    }
    if (api && browse) return ActionClass::browsing_and_api;
    if (api) return ActionClass::api_only;
    if (browse) return ActionClass::browsing_only;
    return ActionClass::none;
}

ErrorCategory categorize_error(const agent::Trajectory& traj, const TaskSpec& task) {
    if (task.api_solvable && !*task.api_solvable) {
        return ErrorCategory::unsolvable_with_api;
    }
    for (const auto& step : traj.steps) {
        if (!step.exec.is_object()) continue;
        std::string kind = step.exec.value("kind", "");
        if (kind == "api" && step.exec.contains("statuses")) {
            for (const auto& status : step.exec["statuses"]) {
                if (status.is_number_integer() && status.get<int>() >= 400) {
                    return ErrorCategory::api_call_error;
                }
            }
        }
        if (kind == "parse_error" && step.exec.value("error_kind", "") == "malformed_block") {
            return ErrorCategory::api_call_error;
        }
    }
    if (traj.terminal == "finished" && traj.answer) {
        return ErrorCategory::task_misunderstanding;
    }
    return ErrorCategory::other;
}

EvalResult evaluate(const agent::Trajectory& traj, const TaskSpec& task,
                    const json& final_snapshot, const std::optional<std::string>& final_url) {
    EvalResult result;
    result.task_id = task.task_id;
    result.action_class = classify_actions(traj);

    if (const auto* m = std::get_if<AnswerMatch>(&task.evaluator)) {
        result.mode = "answer";
        auto [pass, details] = check_answer(traj, *m);
        result.pass = pass;
        result.details = details;
    } else if (const auto* c = std::get_if<StateCheck>(&task.evaluator)) {
        result.mode = "state";
        if (final_snapshot.is_null()) {
            throw MissingInput("StateCheck task '" + task.task_id + "' requires a snapshot");
        }
        result.pass = true;
        for (const auto& assertion : c->assertions) {
            auto [pass, details] = check_assertion(final_snapshot, assertion);
            if (!pass) {
                result.pass = false;
                result.details = details;
                break;
            }
        }
    } else {
        const auto& m = std::get<UrlMatch>(task.evaluator);
        result.mode = "url";
        if (!final_url) {
            throw MissingInput("UrlMatch task '" + task.task_id + "' requires a final URL");
        }
        auto base = traj.base_urls.find(m.site);
        std::string expected =
            normalize_url((base != traj.base_urls.end() ? base->second : "") + m.path);
        std::string got = normalize_url(*final_url);
        if (m.match == "prefix") {
            result.pass = got.rfind(expected, 0) == 0;
        } else {
            result.pass = got == expected;
        }
        if (!result.pass) {
            result.details = "final URL '" + got + "' does not match '" + expected + "' (" +
                             m.match + ")";
        }
    }

    result.error_category =
        result.pass ? ErrorCategory::correct : categorize_error(traj, task);
    return result;
}

json eval_result_to_json(const EvalResult& r) {
    return json{{"task_id", r.task_id},
                {"pass", r.pass},
                {"mode", r.mode},
                {"details", r.details},
                {"action_class", to_string(r.action_class)},
                {"error_category", to_string(r.error_category)}};
}

EvalResult eval_result_from_json(const json& j) {
    EvalResult r;
    r.task_id = j.value("task_id", "");
    r.pass = j.value("pass", false);
    r.mode = j.value("mode", "");
    r.details = j.value("details", "");
    std::string cls = j.value("action_class", "none");
    for (ActionClass c : {ActionClass::browsing_only, ActionClass::api_only,
                          ActionClass::browsing_and_api, ActionClass::none}) {
        if (cls == to_string(c)) r.action_class = c;
    }
    std::string cat = j.value("error_category", "other");
    for (ErrorCategory c : {ErrorCategory::correct, ErrorCategory::unsolvable_with_api,
                            ErrorCategory::task_misunderstanding, ErrorCategory::api_call_error,
                            ErrorCategory::other}) {
        if (cat == to_string(c)) r.error_category = c;
    }
    return r;
}

// ---- aggregation ----

namespace {

std::size_t count_api_calls(const agent::Trajectory& traj) {
    std::size_t calls = 0;
    for (const auto& step : traj.steps) {
        if (step.exec.is_object() && step.exec.value("kind", "") == "api") {
            calls += step.exec.value("http_calls", 0u);
        }
    }
    return calls;
}

void finalize_group(GroupReport& g) {
    if (g.tasks == 0) return;
    g.success_rate = static_cast<double>(g.passed) / static_cast<double>(g.tasks);
    g.mean_steps /= static_cast<double>(g.tasks);
    g.mean_cost /= static_cast<double>(g.tasks);
    for (auto& [name, stats] : g.action_classes) {
        stats.frequency = static_cast<double>(stats.tasks) / static_cast<double>(g.tasks);
        stats.accuracy = stats.tasks == 0
                             ? 0.0
                             : static_cast<double>(stats.passed) /
                                   static_cast<double>(stats.tasks);
    }
    if (g.passing_api_solvable > 0) {
        g.mean_api_calls_passing_api_solvable /=
            static_cast<double>(g.passing_api_solvable);
    }
}

} // namespace

Report aggregate(const std::vector<EvalResult>& results,
                 const std::vector<agent::Trajectory>& trajs) {
    if (results.size() != trajs.size()) {
        throw MisalignedInputs("aggregate: " + std::to_string(results.size()) + " results vs " +
                               std::to_string(trajs.size()) + " trajectories");
    }

    Report report;
    auto group_of = [&](const agent::Trajectory& traj) -> std::string {
        if (traj.site_ids.empty()) return "unknown";
        if (traj.site_ids.size() > 1) return "multi";
        return traj.site_ids.front();
    };

    auto init_classes = [](GroupReport& g) {
        for (ActionClass c : {ActionClass::browsing_only, ActionClass::api_only,
                              ActionClass::browsing_and_api, ActionClass::none}) {
            g.action_classes[to_string(c)];
        }
        for (ErrorCategory c : {ErrorCategory::correct, ErrorCategory::unsolvable_with_api,
                                ErrorCategory::task_misunderstanding,
                                ErrorCategory::api_call_error, ErrorCategory::other}) {
            g.error_categories[to_string(c)] = 0;
        }
    };
    init_classes(report.overall);

    for (std::size_t i = 0; i < results.size(); ++i) {
        const EvalResult& r = results[i];
        const agent::Trajectory& t = trajs[i];
        if (r.task_id != t.task_id) {
            throw MisalignedInputs("aggregate: result '" + r.task_id +
                                   "' does not align with trajectory '" + t.task_id + "'");
        }
        std::string site = group_of(t);
        if (report.per_site.find(site) == report.per_site.end()) {
            init_classes(report.per_site[site]);
        }
        for (GroupReport* g : {&report.overall, &report.per_site[site]}) {
            g->tasks += 1;
            g->passed += r.pass ? 1 : 0;
            g->mean_steps += static_cast<double>(t.steps.size());
            g->mean_cost += t.cost_estimate;
            ClassStats& stats = g->action_classes[to_string(r.action_class)];
            stats.tasks += 1;
            stats.passed += r.pass ? 1 : 0;
            g->error_categories[to_string(r.error_category)] += 1;
        }
    }

    // mean API calls among passing api-solvable tasks needs task labels via
    // the error category convention: we recompute from trajectories whose
    // verdict passed and whose eval is marked api-solvable by the caller.
    for (std::size_t i = 0; i < results.size(); ++i) {
        const EvalResult& r = results[i];
        const agent::Trajectory& t = trajs[i];
        if (!r.pass) continue;
        bool api_solvable = t.eval.is_object() && t.eval.value("api_solvable", false);
        if (!api_solvable) continue;
        std::string site = group_of(t);
        for (GroupReport* g : {&report.overall, &report.per_site[site]}) {
            g->passing_api_solvable += 1;
            g->mean_api_calls_passing_api_solvable +=
                static_cast<double>(count_api_calls(t));
        }
    }

    finalize_group(report.overall);
    for (auto& [site, group] : report.per_site) finalize_group(group);
    return report;
}

namespace {

json group_to_json(const GroupReport& g) {
    json classes = json::object();
    for (const auto& [name, stats] : g.action_classes) {
        classes[name] = json{{"tasks", stats.tasks},
                             {"passed", stats.passed},
                             {"frequency", stats.frequency},
                             {"accuracy", stats.accuracy}};
    }
    return json{{"tasks", g.tasks},
                {"passed", g.passed},
                {"success_rate", g.success_rate},
                {"mean_steps", g.mean_steps},
                {"mean_cost", g.mean_cost},
                {"action_classes", classes},
                {"error_categories", g.error_categories},
                {"mean_api_calls_passing_api_solvable", g.mean_api_calls_passing_api_solvable}};
}

} // namespace

json report_to_json(const Report& report) {
    json sites = json::object();
    for (const auto& [site, group] : report.per_site) {
        sites[site] = group_to_json(group);
    }
    return json{{"overall", group_to_json(report.overall)}, {"per_site", sites}};
}

std::string report_to_text(const Report& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);

    auto line = [&](const std::string& name, const GroupReport& g) {
        out << std::left << std::setw(12) << name << std::right << std::setw(6) << g.tasks
            << std::setw(8) << g.passed << std::setw(10) << g.success_rate << std::setw(10)
            << g.mean_steps << std::setw(10) << g.mean_cost << "\n";
    };

    out << std::left << std::setw(12) << "group" << std::right << std::setw(6) << "tasks"
        << std::setw(8) << "passed" << std::setw(10) << "success" << std::setw(10) << "steps"
        << std::setw(10) << "cost" << "\n";
    line("overall", report.overall);
    for (const auto& [site, group] : report.per_site) line(site, group);

    out << "\naction classes (overall):\n";
    out << std::left << std::setw(18) << "class" << std::right << std::setw(8) << "tasks"
        << std::setw(12) << "frequency" << std::setw(12) << "accuracy" << "\n";
    for (const auto& [name, stats] : report.overall.action_classes) {
        out << std::left << std::setw(18) << name << std::right << std::setw(8) << stats.tasks
            << std::setw(12) << stats.frequency << std::setw(12) << stats.accuracy << "\n";
    }

    out << "\nerror categories (overall):\n";
    for (const auto& [name, count] : report.overall.error_categories) {
        out << "  " << std::left << std::setw(24) << name << count << "\n";
    }
    out << "\nmean API calls among passing api-solvable tasks: "
        << report.overall.mean_api_calls_passing_api_solvable << "\n";
    return out.str();
}

} // namespace webagents::eval
