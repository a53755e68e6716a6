#include <CLI11.hpp>

#include <iostream>

#include "webagents/errors.hpp"
#include "webagents/harness.hpp"

using namespace webagents;

int main(int argc, char** argv) {
    CLI::App app{"webagents - fixture websites, agents, and the evaluation harness"};
    app.require_subcommand(1);

    std::string data_dir = cli::default_data_dir();
    app.add_option("--data", data_dir, "fixture data directory");

    // serve
    auto* serve = app.add_subcommand("serve", "serve fixture sites over loopback HTTP");
    std::vector<std::string> serve_sites;
    int serve_port = 8800;
    bool serve_expanded = false;
    serve->add_option("sites", serve_sites, "site ids (gitforge, forum, shop)")
        ->required()
        ->check(CLI::IsMember({"gitforge", "forum", "shop"}));
    serve->add_option("--port", serve_port, "first port; later sites use port+1, port+2, ...");
    serve->add_flag("--expanded", serve_expanded, "serve the forum with its API expansion pack");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse API documentation into a catalog file");
    std::string ingest_path;
    std::string ingest_format = "auto";
    std::string ingest_site = "site";
    std::string ingest_out = "catalog.json";
    ingest->add_option("doc", ingest_path, "documentation file (OpenAPI YAML or README)")
        ->required();
    ingest->add_option("--format", ingest_format, "openapi | readme | auto")
        ->check(CLI::IsMember({"openapi", "readme", "auto"}));
    ingest->add_option("--site", ingest_site, "site id recorded in the catalog");
    ingest->add_option("--out", ingest_out, "output catalog path");

    // run
    auto* run = app.add_subcommand("run", "run agents over a task corpus and write a report");
    std::string manifest_path;
    std::string run_variant;
    std::string run_backend;
    std::string run_out;
    int run_budget = 0;
    int run_jobs = 0;
    bool run_expanded = false;
    bool run_overwrite = false;
    run->add_option("manifest", manifest_path, "run manifest (JSON)")->required();
    run->add_option("--variant", run_variant, "run only this variant")
        ->check(CLI::IsMember({"browsing", "api_based", "hybrid"}));
    run->add_option("--budget", run_budget, "override the step budget");
    run->add_option("--backend", run_backend, "override the backend kind")
        ->check(CLI::IsMember({"scripted", "http"}));
    run->add_option("--jobs", run_jobs, "parallel tasks (default 1, reproducible)");
    run->add_flag("--expanded", run_expanded, "use the expanded forum fixture");
    run->add_option("--out", run_out, "override the output directory");
    run->add_flag("--overwrite", run_overwrite, "reuse a non-empty output directory");

    // replay
    auto* replay = app.add_subcommand("replay", "re-parse and re-evaluate a stored trajectory");
    std::string replay_traj;
    std::string replay_tasks;
    replay->add_option("trajectory", replay_traj, "trajectory .jsonl file")->required();
    replay->add_option("--tasks", replay_tasks, "task corpus the trajectory belongs to")
        ->required();

    // report
    auto* report = app.add_subcommand("report", "re-aggregate a directory of trajectories");
    std::string report_dir;
    std::string report_tasks;
    std::string report_out;
    report->add_option("dir", report_dir, "directory of trajectory .jsonl files")->required();
    report->add_option("--tasks", report_tasks, "task corpus")->required();
    report->add_option("--out", report_out, "write the aggregate report JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage error
    }

    try {
        if (serve->parsed()) {
            return cli::cmd_serve(data_dir, serve_sites, serve_port, serve_expanded);
        }
        if (ingest->parsed()) {
            return cli::cmd_ingest(ingest_path, ingest_format, ingest_site, ingest_out);
        }
        if (run->parsed()) {
            cli::RunManifest manifest = cli::load_manifest(manifest_path, data_dir);
            if (!run_variant.empty()) manifest.variants = {run_variant};
            if (run_budget > 0) manifest.step_budget = run_budget;
            if (!run_backend.empty()) manifest.backend_kind = run_backend;
            if (run_jobs > 0) manifest.jobs = run_jobs;
            if (!run_out.empty()) manifest.out_dir = run_out;
            if (run_overwrite) manifest.overwrite = true;
            if (run_expanded) {
                for (auto& site : manifest.sites) {
                    if (site.site_id == "forum") site.expanded = true;
                }
            }
            return cli::cmd_run(manifest);
        }
        if (replay->parsed()) {
            return cli::cmd_replay(replay_traj, replay_tasks);
        }
        if (report->parsed()) {
            return cli::cmd_report(report_dir, report_tasks, report_out);
        }
    } catch (const MalformedDoc& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
