#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/agent.hpp"
#include "webagents/eval.hpp"

namespace webagents::cli {

using nlohmann::json;

struct ManifestSite {
    std::string site_id;
    int port = 0; // fixed port: reruns of the same manifest are byte-identical
    bool expanded = false;
};

struct RunManifest {
    std::string data_dir;
    std::vector<std::string> variants; // subset of browsing/api_based/hybrid
    int step_budget = 15;
    std::string backend_kind = "scripted"; // scripted | http
    std::string script_path;               // scripted backends
    std::string endpoint;                  // http backends
    std::string model;
    agent::PriceRates rates;
    std::vector<ManifestSite> sites;
    std::string tasks_path;
    std::string out_dir;
    int jobs = 1;
    unsigned seed = 0;
    std::size_t byte_budget = 8192;
    int viewport_height = 40;
    bool overwrite = false;
};

RunManifest manifest_from_json(const json& j, const std::string& default_data_dir);
RunManifest load_manifest(const std::string& path, const std::string& default_data_dir);

std::string default_data_dir();

// Turns per (task, variant) for the scripted backend, read from the manifest
// script file: {"tasks": {task_id: {variant: [...]}}, "default": {variant: [...]}}.
class ScriptBook {
public:
    static ScriptBook load(const std::string& path);
    std::vector<std::string> turns_for(const std::string& task_id,
                                       const std::string& variant) const;

private:
    json doc_ = json::object();
};

struct RunOutcome {
    int infra_errors = 0;
    json report;
};

int cmd_serve(const std::string& data_dir, const std::vector<std::string>& site_ids, int port,
              bool expanded);
int cmd_ingest(const std::string& doc_path, const std::string& format, const std::string& site_id,
               const std::string& out_path);
RunOutcome run_manifest(const RunManifest& manifest);
int cmd_run(const RunManifest& manifest);
int cmd_replay(const std::string& trajectory_path, const std::string& tasks_path);
int cmd_report(const std::string& trajectory_dir, const std::string& tasks_path,
               const std::string& out_path);

} // namespace webagents::cli
