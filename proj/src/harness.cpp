#include "webagents/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "webagents/errors.hpp"
#include "webagents/simsite.hpp"
#include "webagents/util.hpp"

namespace webagents::cli {

namespace fs = std::filesystem;

std::string default_data_dir() {
    if (const char* env = std::getenv("WEBAGENTS_DATA_DIR")) {
        return env;
    }
#ifdef WEBAGENTS_DEFAULT_DATA_DIR
    return WEBAGENTS_DEFAULT_DATA_DIR;
#else
    return "data";
#endif
}

RunManifest manifest_from_json(const json& j, const std::string& default_dir) {
    RunManifest m;
    m.data_dir = j.value("data_dir", default_dir);
    m.variants = j.value("variants", std::vector<std::string>{"api_based"});
    m.step_budget = j.value("step_budget", 15);
    const json& backend = j.value("backend", json::object());
    m.backend_kind = backend.value("kind", "scripted");
    m.script_path = backend.value("script", "");
    m.endpoint = backend.value("endpoint", "");
    m.model = backend.value("model", "");
    m.rates.input_per_token = backend.value("input_per_token", 2e-6);
    m.rates.output_per_token = backend.value("output_per_token", 6e-6);
    if (!j.contains("sites") || !j["sites"].is_array() || j["sites"].empty()) {
        throw SchemaError("manifest must list at least one site");
    }
    for (const auto& s : j["sites"]) {
        ManifestSite site;
        site.site_id = s.at("site_id").get<std::string>();
        site.port = s.value("port", 0);
        site.expanded = s.value("expanded", false);
        m.sites.push_back(std::move(site));
    }
    m.tasks_path = j.value("tasks", "");
    m.out_dir = j.value("out", "out");
    m.jobs = j.value("jobs", 1);
    m.seed = j.value("seed", 0u);
    m.byte_budget = j.value("byte_budget", std::size_t{8192});
    m.viewport_height = j.value("viewport_height", 40);
    m.overwrite = j.value("overwrite", false);
    return m;
}

RunManifest load_manifest(const std::string& path, const std::string& default_dir) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read manifest: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw SchemaError("manifest is not a JSON object: " + path);
    }
    RunManifest m = manifest_from_json(j, default_dir);
    // relative paths resolve against the manifest's directory
    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
    };
    resolve(m.tasks_path);
    resolve(m.script_path);
    return m;
}

ScriptBook ScriptBook::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read script file: " + path);
    ScriptBook book;
    book.doc_ = json::parse(in, nullptr, false);
    if (book.doc_.is_discarded() || !book.doc_.is_object()) {
        throw SchemaError("script file is not a JSON object: " + path);
    }
    return book;
}

std::vector<std::string> ScriptBook::turns_for(const std::string& task_id,
                                               const std::string& variant) const {
    const json* turns = nullptr;
    if (doc_.contains("tasks") && doc_["tasks"].contains(task_id) &&
        doc_["tasks"][task_id].contains(variant)) {
        turns = &doc_["tasks"][task_id][variant];
    } else if (doc_.contains("default") && doc_["default"].contains(variant)) {
        turns = &doc_["default"][variant];
    }
    std::vector<std::string> out;
    if (turns && turns->is_array()) {
        for (const auto& t : *turns) out.push_back(t.get<std::string>());
    }
    return out;
}

// ---- serve ----

namespace {

std::atomic<bool> g_stop_serving{false};

void handle_sigint(int) { g_stop_serving = true; }

struct LiveSite {
    std::shared_ptr<sim::Site> site;
    std::unique_ptr<sim::SiteServer> server;
};

std::vector<LiveSite> start_sites(const RunManifest& manifest) {
    std::vector<LiveSite> live;
    for (const auto& ms : manifest.sites) {
        sim::SiteFixture fixture = sim::make_site(ms.site_id, manifest.data_dir, ms.expanded);
        std::string base = "http://127.0.0.1:" + std::to_string(ms.port);
        LiveSite ls;
        ls.site = std::make_shared<sim::Site>(std::move(fixture), base);
        ls.server = std::make_unique<sim::SiteServer>(ls.site, "127.0.0.1", ms.port);
        ls.server->start();
        live.push_back(std::move(ls));
    }
    return live;
}

} // namespace

int cmd_serve(const std::string& data_dir, const std::vector<std::string>& site_ids, int port,
              bool expanded) {
    RunManifest manifest;
    manifest.data_dir = data_dir;
    int next_port = port;
    for (const auto& site_id : site_ids) {
        manifest.sites.push_back({site_id, next_port++, expanded});
    }
    std::vector<LiveSite> live;
    try {
        live = start_sites(manifest);
    } catch (const PortInUse& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    for (const auto& ls : live) {
        std::cout << ls.site->fixture().site_id << " serving at " << ls.site->base_url()
                  << " (docs: " << ls.site->fixture().docs_format
                  << ", endpoints: " << ls.site->fixture().api_routes.size() << ")\n";
    }
    std::cout << "press Ctrl-C to stop" << std::endl;
    std::signal(SIGINT, handle_sigint);
    while (!g_stop_serving) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return 0;
}

// ---- ingest ----

int cmd_ingest(const std::string& doc_path, const std::string& format, const std::string& site_id,
               const std::string& out_path) {
    std::ifstream in(doc_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << doc_path << "\n";
        return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    std::string fmt = format;
    if (fmt == "auto") {
        fmt = doc_path.ends_with(".yaml") || doc_path.ends_with(".yml") ? "openapi" : "readme";
    }

    catalog::ApiCatalog cat = [&] {
        if (fmt == "openapi") return catalog::parse_openapi(buf.str(), site_id);
        return catalog::parse_readme(buf.str(), site_id);
    }();

    json endpoints = json::array();
    for (const auto& [id, doc] : cat.endpoints()) {
        json params = json::array();
        for (const auto& p : doc.params) {
            params.push_back(json{{"name", p.name},
                                  {"location", catalog::to_string(p.location)},
                                  {"required", p.required},
                                  {"description", p.description}});
        }
        endpoints.push_back(json{{"id", id.canonical()},
                                 {"summary", doc.summary},
                                 {"body", doc.body},
                                 {"params", params}});
    }
    json out{{"site_id", cat.site_id()},
             {"strategy", catalog::to_string(cat.strategy())},
             {"endpoint_count", cat.size()},
             {"endpoints", endpoints}};

    std::ofstream of(out_path, std::ios::binary);
    of << out.dump(1) << "\n";

    std::ofstream sf(out_path + ".summary.txt", std::ios::binary);
    for (const auto& [id, summary] : catalog::summarize_catalog(cat)) {
        sf << id.canonical() << ": " << summary << "\n";
    }

    std::cout << cat.size() << " endpoints, " << catalog::to_string(cat.strategy()) << "\n";
    return 0;
}

// ---- run ----

namespace {

struct TaskResources {
    std::vector<LiveSite> live;
    std::vector<agent::SiteHandle> handles;
};

// Fresh site state per task keeps evaluator verdicts isolated.
TaskResources start_task_sites(const RunManifest& manifest) {
    TaskResources res;
    res.live = start_sites(manifest);
    for (const auto& ls : res.live) {
        agent::SiteHandle handle;
        handle.site_id = ls.site->fixture().site_id;
        handle.base_url = ls.site->base_url();
        handle.username = ls.site->fixture().username;
        handle.access_token = ls.site->fixture().access_token;
        handle.site = ls.site;
        handle.api_catalog = std::make_shared<const catalog::ApiCatalog>(
            sim::parse_fixture_docs(ls.site->fixture()));
        res.handles.push_back(std::move(handle));
    }
    return res;
}

} // namespace

namespace {

struct TaskRun {
    bool ok = false;
    eval::EvalResult result;
    agent::Trajectory traj;
};

// One task end to end on its own fresh sites; ports are offset per worker
// slot so parallel slots never collide.
TaskRun execute_task(const RunManifest& manifest, const std::optional<ScriptBook>& scripts,
                     const std::string& variant_name, const eval::TaskSpec& task,
                     int port_offset) {
    TaskRun out;
    RunManifest local = manifest;
    for (auto& site : local.sites) site.port += port_offset;

    TaskResources res;
    try {
        res = start_task_sites(local);
    } catch (const Error& e) {
        std::cerr << "infra error on task " << task.task_id << ": " << e.what() << "\n";
        return out;
    }

    std::unique_ptr<agent::LlmBackend> backend;
    if (manifest.backend_kind == "scripted") {
        backend = std::make_unique<agent::ScriptedBackend>(
            scripts->turns_for(task.task_id, variant_name));
    } else {
        const char* key = std::getenv("AGENT_BACKEND_TOKEN");
        backend = std::make_unique<agent::HttpBackend>(manifest.endpoint, manifest.model,
                                                       key ? key : "");
    }

    agent::AgentConfig cfg;
    cfg.variant = agent::variant_from_string(variant_name);
    cfg.step_budget = manifest.step_budget;
    cfg.backend = backend.get();
    cfg.sites = res.handles;
    cfg.byte_budget = manifest.byte_budget;
    cfg.viewport_height = manifest.viewport_height;
    cfg.prompts_dir = manifest.data_dir + "/prompts";
    cfg.rates = manifest.rates;

    try {
        out.traj = agent::run(cfg, task);
    } catch (const Error& e) {
        std::cerr << "infra error on task " << task.task_id << ": " << e.what() << "\n";
        return out;
    }

    out.result = eval::evaluate(out.traj, task, out.traj.final_snapshot, out.traj.final_url);
    out.traj.eval = eval::eval_result_to_json(out.result);
    if (task.api_solvable) out.traj.eval["api_solvable"] = *task.api_solvable;
    out.ok = true;
    return out;
}

} // namespace

RunOutcome run_manifest(const RunManifest& manifest) {
    RunOutcome outcome;
    std::vector<eval::TaskSpec> tasks = eval::load_tasks(manifest.tasks_path);

    if (fs::exists(manifest.out_dir) && !fs::is_empty(manifest.out_dir) && !manifest.overwrite) {
        throw Error("output directory '" + manifest.out_dir +
                    "' is not empty; pass --overwrite to reuse it");
    }
    fs::create_directories(manifest.out_dir);

    std::optional<ScriptBook> scripts;
    if (manifest.backend_kind == "scripted") {
        scripts = ScriptBook::load(manifest.script_path);
    }

    json report = json::object();
    int jobs = std::max(1, manifest.jobs);

    for (const auto& variant_name : manifest.variants) {
        std::vector<TaskRun> slots(tasks.size());

        auto worker = [&](int slot) {
            for (std::size_t i = static_cast<std::size_t>(slot); i < tasks.size();
                 i += static_cast<std::size_t>(jobs)) {
                slots[i] = execute_task(manifest, scripts, variant_name, tasks[i],
                                        slot * 16);
            }
        };
        if (jobs == 1) {
            worker(0);
        } else {
            std::vector<std::thread> pool;
            for (int slot = 0; slot < jobs; ++slot) pool.emplace_back(worker, slot);
            for (auto& t : pool) t.join();
        }

        std::vector<eval::EvalResult> results;
        std::vector<agent::Trajectory> trajs;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (!slots[i].ok) {
                outcome.infra_errors += 1;
                continue;
            }
            fs::path out_file = fs::path(manifest.out_dir) /
                                (variant_name + "__" + tasks[i].task_id + ".jsonl");
            std::ofstream of(out_file, std::ios::binary);
            of << agent::trajectory_to_jsonl(slots[i].traj);
            results.push_back(std::move(slots[i].result));
            trajs.push_back(std::move(slots[i].traj));
        }

        eval::Report variant_report = eval::aggregate(results, trajs);
        report[variant_name] = eval::report_to_json(variant_report);
        report[variant_name]["text"] = eval::report_to_text(variant_report);
    }

    outcome.report = report;

    std::ofstream rf(fs::path(manifest.out_dir) / "report.json", std::ios::binary);
    rf << report.dump(1) << "\n";

    std::ofstream tf(fs::path(manifest.out_dir) / "report.txt", std::ios::binary);
    for (const auto& variant_name : manifest.variants) {
        tf << "=== " << variant_name << " ===\n"
           << report[variant_name].value("text", "") << "\n";
    }
    return outcome;
}

int cmd_run(const RunManifest& manifest) {
    try {
        RunOutcome outcome = run_manifest(manifest);
        for (const auto& variant_name : manifest.variants) {
            const json& overall = outcome.report[variant_name]["overall"];
            std::cout << variant_name << ": " << overall["passed"] << "/" << overall["tasks"]
                      << " passed\n";
        }
        std::cout << "report written to " << manifest.out_dir << "/report.json\n";
        return outcome.infra_errors == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

// ---- replay ----

namespace {

std::optional<eval::TaskSpec> find_task(const std::vector<eval::TaskSpec>& tasks,
                                        const std::string& task_id) {
    for (const auto& task : tasks) {
        if (task.task_id == task_id) return task;
    }
    return std::nullopt;
}

} // namespace

int cmd_replay(const std::string& trajectory_path, const std::string& tasks_path) {
    std::ifstream in(trajectory_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << trajectory_path << "\n";
        return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();

    agent::Trajectory traj;
    try {
        traj = agent::trajectory_from_jsonl(buf.str());
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 1;
    }

    std::vector<eval::TaskSpec> tasks = eval::load_tasks(tasks_path);
    std::optional<eval::TaskSpec> task = find_task(tasks, traj.task_id);
    if (!task) {
        std::cerr << "error: task '" << traj.task_id << "' not in " << tasks_path << "\n";
        return 1;
    }

    int divergences = 0;
    for (const auto& step : traj.steps) {
        actions::ParsedTurn parsed = actions::parse_turn(step.raw_turn);
        json reparsed;
        if (parsed.error) {
            reparsed = json{{"kind", "error"},
                            {"error_kind",
                             parsed.error->kind == actions::TurnError::Kind::multiple_blocks
                                 ? "multiple_blocks"
                                 : "malformed_block"},
                            {"message", parsed.error->message}};
        } else {
            reparsed = actions::action_to_json(*parsed.action);
        }
        if (reparsed != step.action) {
            std::cerr << "step " << step.index << ": parse divergence\n  stored: "
                      << step.action.dump() << "\n  reparsed: " << reparsed.dump() << "\n";
            ++divergences;
        }
    }

    eval::EvalResult result;
    try {
        result = eval::evaluate(traj, *task, traj.final_snapshot,
                                traj.final_url.empty()
                                    ? std::optional<std::string>{}
                                    : std::optional<std::string>{traj.final_url});
    } catch (const MissingInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    bool stored_pass = traj.eval.is_object() && traj.eval.value("pass", false);
    if (traj.eval.is_null()) {
        std::cerr << "error: trajectory has no stored verdict\n";
        return 1;
    }
    if (result.pass != stored_pass) {
        std::cerr << "verdict divergence: stored pass=" << stored_pass
                  << ", replayed pass=" << result.pass << " (" << result.details << ")\n";
        ++divergences;
    }

    if (divergences == 0) {
        std::cout << "replay ok: verdict " << (result.pass ? "pass" : "fail")
                  << " matches stored verdict\n";
        return 0;
    }
    std::cout << divergences << " divergence(s)\n";
    return 1;
}

// ---- report ----

int cmd_report(const std::string& trajectory_dir, const std::string& tasks_path,
               const std::string& out_path) {
    std::vector<eval::TaskSpec> tasks = eval::load_tasks(tasks_path);

    std::map<std::string, std::pair<std::vector<eval::EvalResult>,
                                    std::vector<agent::Trajectory>>> by_variant;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(trajectory_dir)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        agent::Trajectory traj = agent::trajectory_from_jsonl(buf.str());
        std::optional<eval::TaskSpec> task = find_task(tasks, traj.task_id);
        if (!task) {
            std::cerr << "skipping " << file << ": unknown task " << traj.task_id << "\n";
            continue;
        }
        eval::EvalResult result = eval::evaluate(
            traj, *task, traj.final_snapshot,
            traj.final_url.empty() ? std::optional<std::string>{}
                                   : std::optional<std::string>{traj.final_url});
        std::string variant = agent::to_string(traj.variant);
        by_variant[variant].first.push_back(std::move(result));
        by_variant[variant].second.push_back(std::move(traj));
    }

    json report = json::object();
    for (auto& [variant, pair] : by_variant) {
        eval::Report r = eval::aggregate(pair.first, pair.second);
        report[variant] = eval::report_to_json(r);
        std::cout << "=== " << variant << " ===\n" << eval::report_to_text(r) << "\n";
    }
    if (!out_path.empty()) {
        std::ofstream of(out_path, std::ios::binary);
        of << report.dump(1) << "\n";
    }
    return 0;
}

} // namespace webagents::cli
