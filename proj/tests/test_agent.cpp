#include <doctest.h>

#include <httplib.h>

#include <random>

#include "test_helpers.hpp"
#include "webagents/agent.hpp"
#include "webagents/errors.hpp"
#include "webagents/eval.hpp"

using namespace webagents;
using namespace webagents::agent;
using nlohmann::json;

namespace {

constexpr int kPort = 18951;

struct Fixture {
    std::vector<std::shared_ptr<sim::Site>> sites;
    std::vector<std::unique_ptr<sim::SiteServer>> servers;
    std::vector<SiteHandle> handles;

    explicit Fixture(bool with_forum = false) {
        add(sim::make_gitforge(data_dir()), kPort);
        if (with_forum) add(sim::make_forum(data_dir(), false), kPort + 1);
    }

    void add(sim::SiteFixture fixture, int port) {
        auto site = std::make_shared<sim::Site>(std::move(fixture),
                                                "http://127.0.0.1:" + std::to_string(port));
        auto server = std::make_unique<sim::SiteServer>(site, "127.0.0.1", port);
        server->start();
        SiteHandle handle;
        handle.site_id = site->fixture().site_id;
        handle.base_url = site->base_url();
        handle.username = site->fixture().username;
        handle.access_token = site->fixture().access_token;
        handle.site = site;
        handle.api_catalog = std::make_shared<const catalog::ApiCatalog>(
            sim::parse_fixture_docs(site->fixture()));
        sites.push_back(site);
        servers.push_back(std::move(server));
        handles.push_back(std::move(handle));
    }

    AgentConfig config(Variant variant, LlmBackend& backend, int budget = 15) {
        AgentConfig cfg;
        cfg.variant = variant;
        cfg.step_budget = budget;
        cfg.backend = &backend;
        cfg.sites = handles;
        cfg.prompts_dir = data_dir() + "/prompts";
        return cfg;
    }
};

Fixture& fixture() {
    static Fixture f(true);
    return f;
}

eval::TaskSpec simple_task(const std::string& site = "gitforge") {
    eval::TaskSpec task;
    task.task_id = "t";
    task.site_ids = {site};
    task.intent = "How many commits did the user SaptakS make to the a11yproject repository?";
    task.evaluator = eval::AnswerMatch{"exact", "18", {}};
    return task;
}

} // namespace

TEST_CASE("system prompts carry the right sections per variant") {
    ScriptedBackend backend({});
    AgentConfig hybrid = fixture().config(Variant::hybrid, backend);
    std::string hybrid_prompt = build_system_prompt(hybrid);
    CHECK(hybrid_prompt.find("you must always first try to use APIs") != std::string::npos);
    CHECK(hybrid_prompt.find("Be careful about pagination") != std::string::npos);
    CHECK(hybrid_prompt.find("def goto(url: str):") != std::string::npos);
    CHECK(hybrid_prompt.find("def upload_file(") != std::string::npos);
    CHECK(hybrid_prompt.find("AT MOST ONE") != std::string::npos);

    AgentConfig api = fixture().config(Variant::api_based, backend);
    std::string api_prompt = build_system_prompt(api);
    CHECK(api_prompt.find("Be careful about pagination") != std::string::npos);
    CHECK(api_prompt.find("def goto(") == std::string::npos);
    CHECK(api_prompt.find("always first try to use APIs") == std::string::npos);

    AgentConfig browsing = fixture().config(Variant::browsing, backend);
    std::string browse_prompt = build_system_prompt(browsing);
    CHECK(browse_prompt.find("def goto(url: str):") != std::string::npos);
    CHECK(browse_prompt.find("def upload_file(") != std::string::npos);
    CHECK(browse_prompt.find("<execute_api>") == std::string::npos);
    CHECK(browse_prompt.find("pagination") == std::string::npos);
}

TEST_CASE("initial user prompt inlines docs per strategy and hides the token") {
    ScriptedBackend backend({});

    // gitforge has 112 endpoints: two-stage, summaries only
    AgentConfig api = fixture().config(Variant::api_based, backend);
    std::string two_stage = build_initial_user_prompt(api, simple_task());
    CHECK(two_stage.find("How many commits did the user SaptakS") != std::string::npos);
    CHECK(two_stage.find(fixture().handles[0].base_url) != std::string::npos);
    CHECK(two_stage.find("webuser") != std::string::npos);
    CHECK(two_stage.find("- GET /api/projects/{id}/commits: List commits in a project.") !=
          std::string::npos);
    // summaries, not full bodies
    CHECK(two_stage.find("parameters:") == std::string::npos);
    CHECK(two_stage.find("{\"doc\": \"") != std::string::npos);
    // the secret never enters the prompt; the placeholder does
    CHECK(two_stage.find("tok-gitforge") == std::string::npos);
    CHECK(two_stage.find("{ACCESS_TOKEN}") != std::string::npos);

    // the forum has 18 endpoints: one-stage, full docs inline
    eval::TaskSpec forum_task = simple_task("forum");
    std::string one_stage = build_initial_user_prompt(api, forum_task);
    CHECK(one_stage.find("## GET /api/posts") != std::string::npos);
    CHECK(one_stage.find("Response:") != std::string::npos);

    // browsing prompts carry no API text at all
    AgentConfig browsing = fixture().config(Variant::browsing, backend);
    std::string no_api = build_initial_user_prompt(browsing, simple_task());
    CHECK(no_api.find("API") == std::string::npos);
    CHECK(no_api.find("start from the URL") != std::string::npos);

    // multi-site prompts label each catalog with its site
    eval::TaskSpec multi = simple_task();
    multi.site_ids = {"gitforge", "forum"};
    std::string labeled = build_initial_user_prompt(api, multi);
    CHECK(labeled.find("APIs for website 'gitforge'") != std::string::npos);
    CHECK(labeled.find("APIs for website 'forum'") != std::string::npos);
}

TEST_CASE("missing catalogs are rejected for API-capable variants") {
    ScriptedBackend backend({"Finish[x]"});
    Fixture local;
    local.handles[0].api_catalog = nullptr;
    AgentConfig cfg;
    cfg.variant = Variant::api_based;
    cfg.backend = &backend;
    cfg.sites = local.handles;
    cfg.prompts_dir = data_dir() + "/prompts";
    CHECK_THROWS_AS(run(cfg, simple_task()), MissingCatalog);
}

TEST_CASE("a Finish on the first turn ends the run in one step") {
    ScriptedBackend backend({"Finish[18]"});
    AgentConfig cfg = fixture().config(Variant::api_based, backend, 1);
    Trajectory traj = run(cfg, simple_task());
    CHECK(traj.terminal == "finished");
    CHECK(traj.answer == "18");
    CHECK(traj.steps.size() == 1);
    CHECK(traj.final_url == fixture().handles[0].base_url);
}

TEST_CASE("the scripted commits flow finishes in three steps with one HTTP call") {
    ScriptedBackend backend({
        "<execute_api>{\"doc\": \"GET /api/projects/{id}/commits\"}</execute_api>",
        "<execute_api>{\"calls\": [{\"method\": \"GET\", "
        "\"path\": \"/api/projects/a11yproject/commits\", "
        "\"query\": {\"author\": \"SaptakS\"}, \"extract\": {\"count\": \"/total\"}}]}"
        "</execute_api>",
        "Finish[18]",
    });
    AgentConfig cfg = fixture().config(Variant::api_based, backend);
    Trajectory traj = run(cfg, simple_task());
    REQUIRE(traj.terminal == "finished");
    CHECK(traj.steps.size() == 3);
    CHECK(traj.steps[0].exec["kind"] == "doc");
    CHECK(traj.steps[0].observation.find("List commits in a project") != std::string::npos);
    CHECK(traj.steps[1].exec["kind"] == "api");
    CHECK(traj.steps[1].observation.find("count = 18") != std::string::npos);
    CHECK(traj.answer == "18");
}

TEST_CASE("budget exhaustion caps the step count") {
    std::vector<std::string> turns(40, "still thinking");
    ScriptedBackend backend(turns);
    AgentConfig cfg = fixture().config(Variant::api_based, backend, 15);
    Trajectory traj = run(cfg, simple_task());
    CHECK(traj.terminal == "budget_exhausted");
    CHECK(traj.steps.size() == 15);
}

TEST_CASE("variant gating rejects out-of-space actions with observations") {
    ScriptedBackend api_under_browsing({
        "<execute_api>{\"doc\": \"GET /api/version\"}</execute_api>", "Finish[x]"});
    AgentConfig browsing = fixture().config(Variant::browsing, api_under_browsing);
    Trajectory traj = run(browsing, simple_task());
    CHECK(traj.steps[0].exec["kind"] == "rejected");
    CHECK(traj.steps[0].observation.find("not available") != std::string::npos);
    CHECK(eval::classify_actions(traj) == eval::ActionClass::none);

    ScriptedBackend browse_under_api({
        "<execute_browse>scroll(0, 200)</execute_browse>", "Finish[x]"});
    AgentConfig api = fixture().config(Variant::api_based, browse_under_api);
    Trajectory traj2 = run(api, simple_task());
    CHECK(traj2.steps[0].exec["kind"] == "rejected");
    CHECK(eval::classify_actions(traj2) == eval::ActionClass::none);
}

TEST_CASE("history monotonicity: every prior turn and observation reaches the model") {
    ScriptedBackend backend({
        "<execute_api>{\"doc\": \"GET /api/version\"}</execute_api>",
        "<execute_browse>scroll(0, 100)</execute_browse>",
        "a note to self",
        "Finish[done]",
    });
    AgentConfig cfg = fixture().config(Variant::hybrid, backend);
    Trajectory traj = run(cfg, simple_task());
    REQUIRE(traj.steps.size() == 4);
    REQUIRE(backend.requests().size() == 4);

    for (std::size_t k = 0; k < backend.requests().size(); ++k) {
        const auto& messages = backend.requests()[k];
        REQUIRE(messages.size() == 2 + 2 * k); // system, initial, then (turn, obs) pairs
        for (std::size_t prior = 0; prior < k; ++prior) {
            CHECK(messages[2 + 2 * prior].role == "assistant");
            CHECK(messages[2 + 2 * prior].content == traj.steps[prior].raw_turn);
            CHECK(messages[3 + 2 * prior].role == "user");
            CHECK(messages[3 + 2 * prior].content == traj.steps[prior].observation);
        }
    }
}

TEST_CASE("malformed and multiple blocks feed error text back as observations") {
    ScriptedBackend backend({
        "<execute_api>{oops</execute_api>",
        "<execute_api>{\"doc\":\"GET /x\"}</execute_api>"
        "<execute_browse>scroll(0,1)</execute_browse>",
        "Finish[x]",
    });
    AgentConfig cfg = fixture().config(Variant::hybrid, backend);
    Trajectory traj = run(cfg, simple_task());
    CHECK(traj.steps[0].exec["kind"] == "parse_error");
    CHECK(traj.steps[1].exec["kind"] == "parse_error");
    CHECK(traj.steps[1].observation.find("AT MOST ONE") != std::string::npos);
    CHECK(traj.terminal == "finished");
}

TEST_CASE("backend failures annotate the trajectory instead of crashing") {
    ScriptedBackend backend({}); // exhausted immediately
    AgentConfig cfg = fixture().config(Variant::api_based, backend);
    Trajectory traj = run(cfg, simple_task());
    CHECK(traj.terminal == "budget_exhausted");
    CHECK(traj.steps.empty());
    REQUIRE(traj.error.has_value());
    CHECK(traj.error->find("exhausted") != std::string::npos);
}

TEST_CASE("scripted runs are deterministic byte for byte") {
    auto run_once = [] {
        Fixture local; // fresh state, same seed
        ScriptedBackend backend({
            "<execute_api>{\"calls\": [{\"method\": \"GET\", "
            "\"path\": \"/api/projects/a11yproject/commits\", \"query\": {\"page\": 2}}]}"
            "</execute_api>",
            "<execute_browse>goto(\"/p/a11yproject\")\nscroll(0, 200)</execute_browse>",
            "Finish[18]",
        });
        AgentConfig cfg = local.config(Variant::hybrid, backend);
        return trajectory_to_jsonl(run(cfg, simple_task()));
    };
    std::string first = run_once();
    CHECK(first == run_once());
    CHECK(first.find("tok-gitforge") == std::string::npos); // secrecy, again
}

TEST_CASE("budget safety holds for randomized scripted runs") {
    std::mt19937 rng(31337);
    std::uniform_int_distribution<int> pick_budget(1, 6);
    std::uniform_int_distribution<int> pick_len(0, 9);
    std::uniform_int_distribution<int> pick_turn(0, 3);
    const std::vector<std::string> turn_bank = {
        "thinking out loud",
        "<execute_browse>scroll(0, 200)</execute_browse>",
        "<execute_api>{\"doc\": \"GET /api/version\"}</execute_api>",
        "Finish[x]",
    };
    for (int i = 0; i < 60; ++i) {
        int budget = pick_budget(rng);
        std::vector<std::string> turns;
        int len = pick_len(rng);
        for (int t = 0; t < len; ++t) turns.push_back(turn_bank[pick_turn(rng)]);
        ScriptedBackend backend(turns);
        AgentConfig cfg = fixture().config(Variant::hybrid, backend, budget);
        Trajectory traj = run(cfg, simple_task());
        CHECK(traj.steps.size() <= static_cast<std::size_t>(budget));
        if (traj.terminal == "finished") {
            CHECK(traj.steps.back().action["kind"] == "finish");
        }
    }
}

TEST_CASE("the http backend speaks the chat-completions wire format") {
    httplib::Server server;
    json seen_request;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        seen_request = json::parse(req.body);
        json reply{{"choices", json::array({json{{"message",
                                                  json{{"role", "assistant"},
                                                       {"content", "Finish[18]"}}}}})},
                   {"usage", json{{"prompt_tokens", 120}, {"completion_tokens", 4}}}};
        res.set_content(reply.dump(), "application/json");
    });
    REQUIRE(server.bind_to_port("127.0.0.1", 18959));
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackend backend("http://127.0.0.1:18959/v1/chat/completions", "test-model", "sk-test");
    ModelTurn turn = backend.complete({{"system", "be brief"}, {"user", "count commits"}});
    CHECK(turn.text == "Finish[18]");
    CHECK(turn.tokens_in == 120);
    CHECK(turn.tokens_out == 4);
    CHECK(seen_request["model"] == "test-model");
    REQUIRE(seen_request["messages"].size() == 2);
    CHECK(seen_request["messages"][0]["role"] == "system");
    CHECK(seen_request["messages"][1]["content"] == "count commits");

    server.stop();
    listener.join();
}

TEST_CASE("cost estimation is a plain weighted sum") {
    Trajectory traj;
    Step step;
    step.tokens_in = 1000;
    step.tokens_out = 100;
    traj.steps.push_back(step);
    PriceRates rates;
    CHECK(estimate_cost(traj, rates) == doctest::Approx(0.0026));
    CHECK(estimate_cost(Trajectory{}, rates) == 0.0);
}

TEST_CASE("trajectories round-trip through JSONL") {
    ScriptedBackend backend({"<execute_api>{\"doc\": \"GET /api/version\"}</execute_api>",
                             "Finish[ok]"});
    AgentConfig cfg = fixture().config(Variant::api_based, backend);
    Trajectory traj = run(cfg, simple_task());
    std::string text = trajectory_to_jsonl(traj);
    Trajectory again = trajectory_from_jsonl(text);
    CHECK(trajectory_to_jsonl(again) == text);
    CHECK(again.task_id == traj.task_id);
    CHECK(again.steps.size() == traj.steps.size());
    CHECK(again.final_snapshot == traj.final_snapshot);

    CHECK_THROWS_AS(trajectory_from_jsonl("{\"type\":\"header\"}\n"), SchemaError);
    CHECK_THROWS_AS(trajectory_from_jsonl("not json\n"), SchemaError);
}
