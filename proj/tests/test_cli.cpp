#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "test_helpers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string binary() {
    const char* path = std::getenv("WEBAGENTS_BIN");
    REQUIRE_MESSAGE(path != nullptr, "WEBAGENTS_BIN must point at the CLI binary");
    return path;
}

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    std::string cmd = binary() + " " + args + " 2>&1";
    std::array<char, 4096> buffer{};
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) {
        result.output += buffer.data();
    }
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path scratch() {
    fs::path dir = fs::temp_directory_path() / "webagents_cli_test";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("ingest prints endpoint counts and the chosen strategy") {
    fs::path out = scratch() / "gf_catalog.json";
    RunResult r = run_cli("ingest " + data_dir() + "/docs/gitforge_openapi.yaml --site gitforge" +
                          " --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("112 endpoints, two_stage") != std::string::npos);

    json catalog = json::parse(slurp(out.string()));
    CHECK(catalog["endpoint_count"] == 112);
    CHECK(catalog["strategy"] == "two_stage");
    CHECK(fs::exists(out.string() + ".summary.txt"));

    RunResult forum = run_cli("ingest " + data_dir() + "/docs/forum_base.md --site forum --out " +
                              (scratch() / "forum_catalog.json").string());
    CHECK(forum.exit_code == 0);
    CHECK(forum.output.find("18 endpoints, one_stage") != std::string::npos);
}

TEST_CASE("truncated YAML fails with exit 1 and a parser message") {
    fs::path bad = scratch() / "truncated.yaml";
    {
        std::ofstream f(bad);
        f << "openapi: 3.0.3\npaths:\n  /api/x:\n    get: {summary: \"x\", responses: {";
    }
    RunResult r = run_cli("ingest " + bad.string() + " --format openapi --out " +
                          (scratch() / "t.json").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("parse error") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("ingest").exit_code == 2);            // missing required argument
    CHECK(run_cli("serve nowhere").exit_code == 2);     // bad site id
    CHECK(run_cli("run --variant, nope").exit_code == 2);
}

TEST_CASE("run executes the golden manifest for one variant") {
    fs::path out = scratch() / "run_api";
    fs::remove_all(out);
    RunResult r = run_cli("run " + data_dir() + "/manifests/golden.json --variant api_based" +
                          " --out " + out.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("api_based: 7/12 passed") != std::string::npos);

    json report = json::parse(slurp((out / "report.json").string()));
    CHECK(report["api_based"]["overall"]["tasks"] == 12);
    CHECK(report["api_based"]["overall"]["passed"] == 7);
    // one trajectory file per task plus the two report files
    std::size_t jsonl = 0;
    for (const auto& entry : fs::directory_iterator(out)) {
        jsonl += entry.path().extension() == ".jsonl" ? 1 : 0;
    }
    CHECK(jsonl == 12);
}

TEST_CASE("replay reproduces stored verdicts and flags corruption") {
    std::string tasks = data_dir() + "/tasks/bundled_tasks.json";
    RunResult ok = run_cli("replay " + data_dir() +
                           "/recorded/api_based__gf-commits-count.jsonl --tasks " + tasks);
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("replay ok") != std::string::npos);

    // corrupt a raw turn: the re-parse must diverge from the stored action
    std::string text = slurp(data_dir() + "/recorded/api_based__gf-commits-count.jsonl");
    std::size_t pos = text.find("Finish[18]");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "Finish[19]");
    fs::path corrupted = scratch() / "corrupted.jsonl";
    {
        std::ofstream f(corrupted);
        f << text;
    }
    RunResult bad = run_cli("replay " + corrupted.string() + " --tasks " + tasks);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("divergence") != std::string::npos);

    fs::path not_jsonl = scratch() / "not.jsonl";
    {
        std::ofstream f(not_jsonl);
        f << "{\"type\": \"mystery\"}\n";
    }
    CHECK(run_cli("replay " + not_jsonl.string() + " --tasks " + tasks).exit_code == 1);
}

TEST_CASE("report re-aggregates the recorded corpus") {
    fs::path out = scratch() / "reaggregated.json";
    RunResult r = run_cli("report " + data_dir() + "/recorded --tasks " + data_dir() +
                          "/tasks/bundled_tasks.json --out " + out.string());
    CHECK(r.exit_code == 0);
    json report = json::parse(slurp(out.string()));
    CHECK(report["browsing"]["overall"]["passed"] == 3);
    CHECK(report["api_based"]["overall"]["passed"] == 7);
    CHECK(report["hybrid"]["overall"]["passed"] == 11);
}

TEST_CASE("an empty task corpus produces an empty report and exit 0") {
    fs::path empty_tasks = scratch() / "empty_tasks.json";
    {
        std::ofstream f(empty_tasks);
        f << "[]\n";
    }
    fs::path manifest = scratch() / "empty_manifest.json";
    {
        std::ofstream f(manifest);
        json m{{"variants", {"api_based"}},
               {"backend", {{"kind", "scripted"}, {"script", data_dir() + "/scripts/golden.json"}}},
               {"sites", json::array({{{"site_id", "forum"}, {"port", 18961}}})},
               {"tasks", empty_tasks.string()},
               {"out", (scratch() / "empty_out").string()}};
        f << m.dump();
    }
    fs::remove_all(scratch() / "empty_out");
    RunResult r = run_cli("run " + manifest.string());
    CHECK(r.exit_code == 0);
    json report = json::parse(slurp((scratch() / "empty_out" / "report.json").string()));
    CHECK(report["api_based"]["overall"]["tasks"] == 0);

    // a second run into the now non-empty directory needs --overwrite
    RunResult refused = run_cli("run " + manifest.string());
    CHECK(refused.exit_code == 1);
    CHECK(refused.output.find("not empty") != std::string::npos);
    CHECK(run_cli("run " + manifest.string() + " --overwrite").exit_code == 0);
}
