#include "webagents/agent.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "webagents/actions.hpp"
#include "webagents/browser.hpp"
#include "webagents/errors.hpp"
#include "webagents/executor.hpp"
#include "webagents/util.hpp"

namespace webagents::agent {

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read prompt template: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string replace_all(std::string text, const std::string& token, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
    return text;
}

// Full docs for one-stage catalogs, summaries plus the lookup instruction
// for two-stage ones.
std::string docs_block(const catalog::ApiCatalog& cat) {
    std::ostringstream out;
    if (cat.strategy() == catalog::DocStrategy::one_stage) {
        bool first = true;
        for (const auto& [id, summary] : catalog::summarize_catalog(cat)) {
            const catalog::EndpointDoc* doc = cat.find(id);
            if (!first) out << "\n";
            first = false;
            out << doc->body;
            if (!doc->body.empty() && doc->body.back() != '\n') out << "\n";
        }
    } else {
        out << "This site exposes " << cat.size()
            << " endpoints, so only one-line summaries are listed here. Retrieve the full "
               "documentation of an endpoint before using it.\n\n";
        for (const auto& [id, summary] : catalog::summarize_catalog(cat)) {
            out << "- " << id.canonical() << ": " << summary << "\n";
        }
    }
    return out.str();
}

std::string assemble_api_docs(const eval::TaskSpec& task,
                              const std::vector<const SiteHandle*>& handles) {
    std::ostringstream out;
    bool multi = handles.size() > 1;
    for (std::size_t i = 0; i < handles.size(); ++i) {
        const SiteHandle* handle = handles[i];
        if (!handle->api_catalog) {
            throw MissingCatalog("no API catalog for site '" + handle->site_id +
                                 "' required by task " + task.task_id);
        }
        if (multi) {
            out << "=== APIs for website '" << handle->site_id << "' (" << handle->base_url
                << ") ===\n\n";
        }
        out << docs_block(*handle->api_catalog);
        if (i + 1 < handles.size()) out << "\n";
    }
    return out.str();
}

std::vector<const SiteHandle*> task_handles(const AgentConfig& cfg, const eval::TaskSpec& task) {
    std::vector<const SiteHandle*> handles;
    for (const auto& site_id : task.site_ids) {
        const SiteHandle* found = nullptr;
        for (const auto& handle : cfg.sites) {
            if (handle.site_id == site_id) found = &handle;
        }
        if (!found) throw Error("task " + task.task_id + " needs unknown site '" + site_id + "'");
        handles.push_back(found);
    }
    if (handles.empty()) throw Error("task " + task.task_id + " names no sites");
    return handles;
}

std::string first_endpoint_id(const catalog::ApiCatalog& cat) {
    auto rows = catalog::summarize_catalog(cat);
    return rows.empty() ? "GET /api/version" : rows.front().first.canonical();
}

std::string digest_messages(const std::vector<ChatMessage>& messages) {
    std::ostringstream all;
    for (const auto& m : messages) {
        all << m.role << "\x1f" << m.content << "\x1e";
    }
    return fnv1a64_hex(all.str());
}

json exec_rejected(const std::string& reason) {
    return json{{"kind", "rejected"}, {"reason", reason}};
}

} // namespace

const char* to_string(Variant variant) {
    switch (variant) {
    case Variant::browsing: return "browsing";
    case Variant::api_based: return "api_based";
    case Variant::hybrid: return "hybrid";
    }
    return "api_based";
}

Variant variant_from_string(std::string_view text) {
    if (text == "browsing") return Variant::browsing;
    if (text == "api_based") return Variant::api_based;
    if (text == "hybrid") return Variant::hybrid;
    throw Error("unknown agent variant: " + std::string(text));
}

std::string build_system_prompt(const AgentConfig& cfg) {
    const std::string& dir = cfg.prompts_dir;
    switch (cfg.variant) {
    case Variant::browsing:
        return slurp(dir + "/system_prefix_browsing.txt") + "\n" +
               slurp(dir + "/browsing_prompt.txt") + "\n" +
               slurp(dir + "/system_suffix_browsing.txt");
    case Variant::api_based:
        return slurp(dir + "/system_prefix_api.txt") + "\n" + slurp(dir + "/api_prompt.txt") +
               "\n" + slurp(dir + "/system_suffix.txt");
    case Variant::hybrid:
        return slurp(dir + "/system_prefix_hybrid.txt") + "\n" + slurp(dir + "/api_prompt.txt") +
               "\n" + slurp(dir + "/browsing_prompt.txt") + "\n" +
               slurp(dir + "/system_suffix.txt");
    }
    throw Error("unreachable");
}

std::string build_initial_user_prompt(const AgentConfig& cfg, const eval::TaskSpec& task) {
    std::vector<const SiteHandle*> handles = task_handles(cfg, task);
    const SiteHandle* primary = handles.front();

    std::string tmpl;
    switch (cfg.variant) {
    case Variant::browsing: tmpl = slurp(cfg.prompts_dir + "/initial_user_browsing.txt"); break;
    case Variant::api_based: tmpl = slurp(cfg.prompts_dir + "/initial_user_api.txt"); break;
    case Variant::hybrid: tmpl = slurp(cfg.prompts_dir + "/initial_user_hybrid.txt"); break;
    }

    std::string site_label = primary->site_id;
    for (std::size_t i = 1; i < handles.size(); ++i) {
        site_label += " and " + handles[i]->site_id;
    }

    tmpl = replace_all(std::move(tmpl), "{intent}", task.intent);
    tmpl = replace_all(std::move(tmpl), "{site_id}", site_label);
    tmpl = replace_all(std::move(tmpl), "{base_url}", primary->base_url);
    tmpl = replace_all(std::move(tmpl), "{username}", primary->username);
    tmpl = replace_all(std::move(tmpl), "{start_url}",
                       primary->base_url + task.start_path);
    // The literal placeholder stays in the prompt; the executor injects the
    // real token, so the secret never reaches the model or the logs.
    tmpl = replace_all(std::move(tmpl), "{access_token}", "{ACCESS_TOKEN}");

    if (cfg.variant != Variant::browsing) {
        tmpl = replace_all(std::move(tmpl), "{api_docs}", assemble_api_docs(task, handles));
        std::string example = primary->api_catalog ? first_endpoint_id(*primary->api_catalog)
                                                   : "GET /api/version";
        tmpl = replace_all(std::move(tmpl), "{example_endpoint}", example);
    }
    return tmpl;
}

double estimate_cost(const Trajectory& traj, const PriceRates& rates) {
    double cost = 0.0;
    for (const auto& step : traj.steps) {
        cost += static_cast<double>(step.tokens_in) * rates.input_per_token +
                static_cast<double>(step.tokens_out) * rates.output_per_token;
    }
    return cost;
}

Trajectory run(const AgentConfig& cfg, const eval::TaskSpec& task) {
    if (cfg.backend == nullptr) throw Error("agent run requires a backend");
    std::vector<const SiteHandle*> handles = task_handles(cfg, task);
    const SiteHandle* primary = handles.front();

    if (cfg.variant != Variant::browsing) {
        for (const SiteHandle* handle : handles) {
            if (!handle->api_catalog) {
                throw MissingCatalog("no API catalog for site '" + handle->site_id + "'");
            }
        }
    }

    Trajectory traj;
    traj.task_id = task.task_id;
    traj.variant = cfg.variant;
    traj.step_budget = cfg.step_budget;
    traj.backend_kind = cfg.backend->kind();
    for (const SiteHandle* handle : handles) {
        traj.site_ids.push_back(handle->site_id);
        traj.base_urls[handle->site_id] = handle->base_url;
    }
    traj.start_url = primary->base_url + task.start_path;

    // One browser and one binding environment per task.
    std::vector<std::shared_ptr<sim::Site>> sites;
    for (const SiteHandle* handle : handles) sites.push_back(handle->site);
    sim::SitePageProvider pages(sites, sim::Session{primary->username});
    browse::BrowserState browser =
        browse::initial_state(traj.start_url, pages, cfg.viewport_height);

    exec::ExecContext ctx = exec::make_context(primary->base_url, primary->access_token,
                                               cfg.byte_budget);
    for (const SiteHandle* handle : handles) {
        ctx.host_tokens[normalize_url(handle->base_url)] = handle->access_token;
    }
    ctx.bindings["username"] = primary->username;

    std::vector<ChatMessage> messages;
    messages.push_back({"system", build_system_prompt(cfg)});
    messages.push_back({"user", build_initial_user_prompt(cfg, task)});

    bool scripted = cfg.backend->kind() == "scripted";
    traj.terminal = "budget_exhausted";

    for (int index = 1; index <= cfg.step_budget; ++index) {
        Step step;
        step.index = index;
        step.prompt_digest = digest_messages(messages);

        ModelTurn turn;
        auto started = std::chrono::steady_clock::now();
        try {
            turn = cfg.backend->complete(messages);
        } catch (const BackendError& e) {
            traj.error = e.what();
            break;
        }
        if (!scripted) {
            step.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
        }
        step.raw_turn = turn.text;
        step.tokens_in = turn.tokens_in;
        step.tokens_out = turn.tokens_out;
        traj.tokens_in += turn.tokens_in;
        traj.tokens_out += turn.tokens_out;

        actions::ParsedTurn parsed = actions::parse_turn(turn.text);
        bool terminal = false;

        if (parsed.error) {
            step.action = json{{"kind", "error"},
                               {"error_kind",
                                parsed.error->kind == actions::TurnError::Kind::multiple_blocks
                                    ? "multiple_blocks"
                                    : "malformed_block"},
                               {"message", parsed.error->message}};
            step.exec = json{{"kind", "parse_error"},
                             {"error_kind", step.action["error_kind"]}};
            step.observation = parsed.error->message;
        } else {
            const actions::Action& action = *parsed.action;
            step.action = actions::action_to_json(action);

            if (std::holds_alternative<actions::Finish>(action)) {
                traj.answer = std::get<actions::Finish>(action).answer;
                traj.terminal = "finished";
                step.exec = json{{"kind", "none"}};
                step.observation = "";
                terminal = true;
            } else if (std::holds_alternative<actions::Exit>(action)) {
                traj.terminal = "exited";
                step.exec = json{{"kind", "none"}};
                step.observation = "";
                terminal = true;
            } else if (std::holds_alternative<actions::Message>(action)) {
                step.exec = json{{"kind", "none"}};
                step.observation =
                    "Message noted. The user cannot reply or clarify anything. Continue with "
                    "the task, or respond with Finish[answer] when you are done.";
            } else if (std::holds_alternative<actions::DocLookup>(action)) {
                if (cfg.variant == Variant::browsing) {
                    step.exec = exec_rejected("api_unavailable");
                    step.observation = "API calls are not available to this agent. Use the "
                                       "browsing commands instead.";
                } else {
                    const auto& id = std::get<actions::DocLookup>(action).id;
                    catalog::LookupResult result;
                    for (const SiteHandle* handle : handles) {
                        result = catalog::get_api_documentation(*handle->api_catalog, id);
                        if (result.found) break;
                    }
                    step.exec = json{{"kind", "doc"}, {"found", result.found}};
                    step.observation = result.text;
                }
            } else if (std::holds_alternative<actions::ApiProgram>(action)) {
                if (cfg.variant == Variant::browsing) {
                    step.exec = exec_rejected("api_unavailable");
                    step.observation = "API calls are not available to this agent. Use the "
                                       "browsing commands instead.";
                } else {
                    const auto& program = std::get<actions::ApiProgram>(action);
                    try {
                        auto [results, bindings] = exec::execute_program(program, ctx);
                        json extracted = json::object();
                        for (const auto& call : program.calls) {
                            for (const auto& [name, ptr] : call.extract) {
                                if (bindings.contains(name)) extracted[name] = bindings[name];
                            }
                        }
                        step.observation =
                            actions::render_api_result(results, extracted, cfg.byte_budget);
                        json statuses = json::array();
                        json pages_fetched = json::array();
                        for (const auto& r : results) {
                            statuses.push_back(r.status);
                            pages_fetched.push_back(r.pages_fetched);
                        }
                        step.exec = json{{"kind", "api"},
                                         {"http_calls", results.size()},
                                         {"statuses", statuses},
                                         {"pages", pages_fetched}};
                    } catch (const UnresolvedReference& e) {
                        step.exec = json{{"kind", "api"},
                                         {"http_calls", 0},
                                         {"statuses", json::array()},
                                         {"error", "unresolved_reference"}};
                        step.observation = std::string("UnresolvedReference: ") + e.what();
                    }
                }
            } else { // BrowseProgram
                if (cfg.variant == Variant::api_based) {
                    step.exec = exec_rejected("browsing_unavailable");
                    step.observation = "Browsing actions are not available to this agent. Use "
                                       "the APIs instead.";
                } else {
                    const auto& program = std::get<actions::BrowseProgram>(action);
                    json notes = json::array();
                    std::ostringstream obs;
                    for (const auto& cmd : program.commands) {
                        browse::ApplyResult applied = browse::apply(browser, cmd, pages);
                        browser = std::move(applied.state);
                        if (!applied.note.empty()) {
                            notes.push_back(applied.note);
                            obs << applied.note << "\n";
                        }
                    }
                    obs << browse::observe(browser);
                    step.exec = json{{"kind", "browse"},
                                     {"commands", program.commands.size()},
                                     {"notes", notes}};
                    step.observation = obs.str();
                }
            }
        }

        messages.push_back({"assistant", step.raw_turn});
        if (!terminal) {
            messages.push_back({"user", step.observation});
        }
        traj.steps.push_back(std::move(step));
        if (terminal) break;
    }

    traj.final_url = normalize_url(browser.current.url);
    for (const SiteHandle* handle : handles) {
        traj.final_snapshot[handle->site_id] = handle->site->snapshot();
    }
    traj.cost_estimate = estimate_cost(traj, cfg.rates);
    return traj;
}

// ---- JSONL persistence ----

namespace {

json step_to_json(const Step& step) {
    return json{{"type", "step"},
                {"index", step.index},
                {"prompt_digest", step.prompt_digest},
                {"raw_turn", step.raw_turn},
                {"action", step.action},
                {"exec", step.exec},
                {"observation", step.observation},
                {"wall_ms", step.wall_ms},
                {"tokens_in", step.tokens_in},
                {"tokens_out", step.tokens_out}};
}

Step step_from_json(const json& j) {
    Step step;
    step.index = j.value("index", 0);
    step.prompt_digest = j.value("prompt_digest", "");
    step.raw_turn = j.value("raw_turn", "");
    step.action = j.value("action", json());
    step.exec = j.value("exec", json());
    step.observation = j.value("observation", "");
    step.wall_ms = j.value("wall_ms", 0L);
    step.tokens_in = j.value("tokens_in", 0u);
    step.tokens_out = j.value("tokens_out", 0u);
    return step;
}

} // namespace

std::string trajectory_to_jsonl(const Trajectory& traj) {
    std::ostringstream out;
    json header{{"type", "header"},
                {"task_id", traj.task_id},
                {"variant", to_string(traj.variant)},
                {"step_budget", traj.step_budget},
                {"backend", traj.backend_kind},
                {"site_ids", traj.site_ids},
                {"base_urls", traj.base_urls},
                {"start_url", traj.start_url}};
    out << header.dump() << "\n";
    for (const auto& step : traj.steps) {
        out << step_to_json(step).dump() << "\n";
    }
    json terminal{{"type", "terminal"},
                  {"state", traj.terminal},
                  {"steps_used", traj.steps.size()},
                  {"tokens_in", traj.tokens_in},
                  {"tokens_out", traj.tokens_out},
                  {"cost_estimate", traj.cost_estimate},
                  {"final_url", traj.final_url},
                  {"final_snapshot", traj.final_snapshot}};
    terminal["answer"] = traj.answer ? json(*traj.answer) : json();
    terminal["error"] = traj.error ? json(*traj.error) : json();
    if (!traj.eval.is_null()) terminal["eval"] = traj.eval;
    out << terminal.dump() << "\n";
    return out.str();
}

Trajectory trajectory_from_jsonl(const std::string& text) {
    Trajectory traj;
    bool saw_header = false;
    bool saw_terminal = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("type")) {
            throw SchemaError("trajectory line is not a typed JSON object: " + line);
        }
        std::string type = j["type"];
        if (type == "header") {
            saw_header = true;
            traj.task_id = j.value("task_id", "");
            traj.variant = variant_from_string(j.value("variant", "api_based"));
            traj.step_budget = j.value("step_budget", 15);
            traj.backend_kind = j.value("backend", "");
            traj.site_ids = j.value("site_ids", std::vector<std::string>{});
            if (j.contains("base_urls")) {
                for (const auto& [k, v] : j["base_urls"].items()) {
                    traj.base_urls[k] = v.get<std::string>();
                }
            }
            traj.start_url = j.value("start_url", "");
        } else if (type == "step") {
            traj.steps.push_back(step_from_json(j));
        } else if (type == "terminal") {
            saw_terminal = true;
            traj.terminal = j.value("state", "");
            traj.tokens_in = j.value("tokens_in", 0u);
            traj.tokens_out = j.value("tokens_out", 0u);
            traj.cost_estimate = j.value("cost_estimate", 0.0);
            traj.final_url = j.value("final_url", "");
            traj.final_snapshot = j.value("final_snapshot", json::object());
            if (j.contains("answer") && !j["answer"].is_null()) {
                traj.answer = j["answer"].get<std::string>();
            }
            if (j.contains("error") && !j["error"].is_null()) {
                traj.error = j["error"].get<std::string>();
            }
            if (j.contains("eval")) traj.eval = j["eval"];
        } else {
            throw SchemaError("unknown trajectory line type: " + type);
        }
    }
    if (!saw_header || !saw_terminal) {
        throw SchemaError("trajectory file is missing its header or terminal line");
    }
    return traj;
}

} // namespace webagents::agent
