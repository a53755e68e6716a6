#include <algorithm>

#include "simsite_internal.hpp"
#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::sim {

using namespace detail;

namespace {

json derive_contributors(const json& project, const json& users) {
    std::map<std::string, json> by_author;
    for (const auto& commit : project["commits"]) {
        std::string author = commit.value("author", "");
        auto it = by_author.find(author);
        if (it == by_author.end()) {
            json entry{{"username", author},
                       {"email", commit.value("email", "")},
                       {"commits", 1}};
            if (const json* user = find_item(users, "username", author)) {
                entry["name"] = user->value("name", author);
            } else {
                entry["name"] = author;
            }
            by_author.emplace(author, std::move(entry));
        } else {
            it->second["commits"] = it->second["commits"].get<int>() + 1;
        }
    }
    std::vector<json> rows;
    rows.reserve(by_author.size());
    for (auto& [author, row] : by_author) rows.push_back(std::move(row));
    std::sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
        int ca = a["commits"].get<int>();
        int cb = b["commits"].get<int>();
        if (ca != cb) return ca > cb;
        return a["username"].get<std::string>() < b["username"].get<std::string>();
    });
    json out = json::array();
    for (auto& row : rows) out.push_back(std::move(row));
    return out;
}

json* find_project(SiteState& state, const RouteParams& p, ApiResponse* err) {
    json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    if (!project) *err = error_response(404, "not_found", "no project '" + p.path.at("id") + "'");
    return project;
}

void add_project_crud(std::vector<RouteSpec>& routes, const std::string& leaf,
                      const std::string& item_param, const std::string& id_field,
                      const std::string& collection_flags, const std::string& item_flags) {
    CrudSpec spec;
    spec.collection_tmpl = "/api/projects/{id}/" + leaf;
    spec.steps = {{"projects", "id", "id"}};
    spec.leaf = leaf;
    spec.item_param = item_param;
    spec.id_field = id_field;
    spec.flags = collection_flags + item_flags;
    add_crud(routes, spec);
}

std::vector<RouteSpec> gitforge_routes() {
    std::vector<RouteSpec> routes;

    add_route(routes, "GET", "/api/version", false, [](SiteState& state, const RouteParams&) {
        return ApiResponse{200, json{{"version", state.data().value("version", "")}}};
    });

    add_route(routes, "GET", "/api/user", true, [](SiteState& state, const RouteParams& p) {
        if (const json* user = find_item(state.data()["users"], "username", p.session.username)) {
            return ApiResponse{200, *user};
        }
        return error_response(404, "not_found", "token user has no profile");
    });

    add_route(routes, "GET", "/api/search", false, [](SiteState& state, const RouteParams& p) {
        auto q_it = p.query.find("q");
        if (q_it == p.query.end() || q_it->second.empty()) {
            return error_response(400, "bad_request", "missing query parameter 'q'");
        }
        std::string q = to_lower(q_it->second);
        std::string scope = p.query.count("scope") ? p.query.at("scope") : "projects";
        auto contains = [&q](const json& v) {
            return v.is_string() && to_lower(v.get<std::string>()).find(q) != std::string::npos;
        };
        json hits = json::array();
        if (scope == "users") {
            for (const auto& u : state.data()["users"]) {
                if (contains(u["username"]) || contains(u["name"])) hits.push_back(u);
            }
        } else if (scope == "issues") {
            for (const auto& project : state.data()["projects"]) {
                for (const auto& issue : project["issues"]) {
                    if (contains(issue["title"]) || contains(issue["description"])) {
                        json hit = issue;
                        hit["project"] = project["id"];
                        hits.push_back(hit);
                    }
                }
            }
        } else {
            for (const auto& project : state.data()["projects"]) {
                if (contains(project["id"]) || contains(project["name"]) ||
                    contains(project["description"])) {
                    hits.push_back(project);
                }
            }
        }
        return paginated(hits, p);
    });

    add_crud(routes, {"/api/users", {}, "users", "username", "username", "LCGUD"});

    add_route(routes, "GET", "/api/users/{username}/projects", false,
              [](SiteState& state, const RouteParams& p) {
                  json hits = json::array();
                  for (const auto& project : state.data()["projects"]) {
                      if (project.value("owner", "") == p.path.at("username")) {
                          hits.push_back(project);
                      }
                  }
                  return paginated(hits, p);
              });

    add_route(routes, "GET", "/api/users/{username}/events", false,
              [](SiteState& state, const RouteParams& p) {
                  json events = json::array();
                  for (const auto& project : state.data()["projects"]) {
                      for (const auto& commit : project["commits"]) {
                          if (commit.value("author", "") == p.path.at("username")) {
                              events.push_back(json{{"type", "commit"},
                                                    {"project", project["id"]},
                                                    {"sha", commit["sha"]},
                                                    {"message", commit["message"]},
                                                    {"created_at", commit["created_at"]}});
                          }
                      }
                  }
                  std::sort(events.begin(), events.end(), [](const json& a, const json& b) {
                      return a["created_at"].get<std::string>() >
                             b["created_at"].get<std::string>();
                  });
                  return paginated(events, p);
              });

    add_crud(routes, {"/api/users/{username}/keys", {{"users", "username", "username"}}, "keys",
                      "key_id", "key_id", "LCGD"});

    add_crud(routes, {"/api/groups", {}, "groups", "id", "id", "LCGUD"});
    add_crud(routes, {"/api/groups/{id}/members", {{"groups", "id", "id"}}, "members", "username",
                      "username", "LCGUD"});

    add_route(routes, "GET", "/api/groups/{id}/projects", false,
              [](SiteState& state, const RouteParams& p) {
                  const json* group = find_item(state.data()["groups"], "id", p.path.at("id"));
                  if (!group) return error_response(404, "not_found", "no such group");
                  json hits = json::array();
                  for (const auto& project : state.data()["projects"]) {
                      std::string owner = project.value("owner", "");
                      if (find_item((*group)["members"], "username", owner)) {
                          hits.push_back(project);
                      }
                  }
                  return paginated(hits, p);
              });

    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/projects";
        spec.leaf = "projects";
        spec.item_param = "id";
        spec.id_field = "id";
        spec.flags = "LCGUD";
        spec.create_defaults = json::parse(R"({"description": "", "stars": 0, "starrers": [],
            "languages": {}, "commits": [], "branches": [], "tags": [], "issues": [],
            "merge_requests": [], "milestones": [], "labels": [], "members": [],
            "releases": [], "pipelines": [], "hooks": [], "snippets": [],
            "environments": [], "visibility": "public"})");
        add_crud(routes, spec);
    }

    add_route(routes, "POST", "/api/projects/{id}/fork", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  std::string fork_id = p.session.username + "-" + p.path.at("id");
                  if (find_item(state.data()["projects"], "id", fork_id)) {
                      return error_response(409, "conflict", "fork already exists");
                  }
                  json fork = *project;
                  fork["id"] = fork_id;
                  fork["owner"] = p.session.username;
                  fork["stars"] = 0;
                  fork["starrers"] = json::array();
                  state.data()["projects"].push_back(fork);
                  state.log_mutation("create", "/api/projects/{id}/fork",
                                     json{{"id", fork_id}}, p.session.username);
                  return ApiResponse{201, fork};
              });

    add_route(routes, "POST", "/api/projects/{id}/star", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  json& starrers = (*project)["starrers"];
                  bool present = false;
                  for (const auto& u : starrers) present |= u == p.session.username;
                  if (!present) {
                      starrers.push_back(p.session.username);
                      (*project)["stars"] = starrers.size();
                      state.log_mutation("update", "/api/projects/{id}/star",
                                         json{{"id", p.path.at("id")}}, p.session.username);
                  }
                  return ApiResponse{200, *project};
              });

    add_route(routes, "POST", "/api/projects/{id}/unstar", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  json& starrers = (*project)["starrers"];
                  json kept = json::array();
                  bool removed = false;
                  for (const auto& u : starrers) {
                      if (u == p.session.username && !removed) {
                          removed = true;
                      } else {
                          kept.push_back(u);
                      }
                  }
                  if (removed) {
                      starrers = kept;
                      (*project)["stars"] = starrers.size();
                      state.log_mutation("update", "/api/projects/{id}/unstar",
                                         json{{"id", p.path.at("id")}}, p.session.username);
                  }
                  return ApiResponse{200, *project};
              });

    add_route(routes, "GET", "/api/projects/{id}/starrers", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  json hits = json::array();
                  for (const auto& username : (*project)["starrers"]) {
                      if (const json* user = find_item(state.data()["users"], "username",
                                                       username.get<std::string>())) {
                          hits.push_back(*user);
                      }
                  }
                  return paginated(hits, p);
              });

    add_route(routes, "GET", "/api/projects/{id}/languages", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  return ApiResponse{200, (*project)["languages"]};
              });

    add_route(routes, "GET", "/api/projects/{id}/contributors", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  return ApiResponse{200, derive_contributors(*project, state.data()["users"])};
              });

    add_route(routes, "GET", "/api/projects/{id}/commits", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  auto author = p.query.find("author");
                  if (author == p.query.end()) {
                      return paginated((*project)["commits"], p);
                  }
                  json hits = json::array();
                  for (const auto& commit : (*project)["commits"]) {
                      if (commit.value("author", "") == author->second) hits.push_back(commit);
                  }
                  return paginated(hits, p);
              });

    add_project_crud(routes, "commits", "sha", "sha", "", "G");

    add_route(routes, "GET", "/api/projects/{id}/commits/{sha}/diff", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  const json* commit =
                      find_item((*project)["commits"], "sha", p.path.at("sha"));
                  if (!commit) return error_response(404, "not_found", "no such commit");
                  std::string sha = p.path.at("sha");
                  int adds = 1 + (sha[0] % 9);
                  int dels = sha[1] % 7;
                  json diff = json::array({json{{"path", "docs/section-" + sha.substr(0, 2) + ".md"},
                                                {"additions", adds},
                                                {"deletions", dels}}});
                  return ApiResponse{200, diff};
              });

    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/projects/{id}/commits/{sha}/comments";
        spec.steps = {{"projects", "id", "id"}, {"commits", "sha", "sha"}};
        spec.leaf = "comments";
        spec.item_param = "comment_id";
        spec.id_field = "id";
        spec.flags = "LC";
        add_crud(routes, spec);
    }

    add_project_crud(routes, "branches", "branch", "name", "LC", "GD");

    for (const char* op : {"protect", "unprotect"}) {
        bool protect = std::string(op) == "protect";
        add_route(routes, "PUT", std::string("/api/projects/{id}/branches/{branch}/") + op, true,
                  [protect](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* project = find_project(state, p, &err);
                      if (!project) return err;
                      json* branch =
                          find_item((*project)["branches"], "name", p.path.at("branch"));
                      if (!branch) return error_response(404, "not_found", "no such branch");
                      (*branch)["protected"] = protect;
                      state.log_mutation("update", "/api/projects/{id}/branches/{branch}",
                                         json{{"name", p.path.at("branch")},
                                              {"protected", protect}},
                                         p.session.username);
                      return ApiResponse{200, *branch};
                  });
    }

    add_project_crud(routes, "tags", "tag", "name", "LC", "GD");
    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/projects/{id}/issues";
        spec.steps = {{"projects", "id", "id"}};
        spec.leaf = "issues";
        spec.item_param = "iid";
        spec.id_field = "iid";
        spec.flags = "LCGUD";
        spec.create_defaults = json{{"state", "open"}, {"description", ""},
                                    {"labels", json::array()}, {"notes", json::array()}};
        add_crud(routes, spec);
    }

    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/projects/{id}/issues/{iid}/notes";
        spec.steps = {{"projects", "id", "id"}, {"issues", "iid", "iid"}};
        spec.leaf = "notes";
        spec.item_param = "note_id";
        spec.id_field = "note_id";
        spec.flags = "LCGUD";
        add_crud(routes, spec);
    }

    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/projects/{id}/merge_requests";
        spec.steps = {{"projects", "id", "id"}};
        spec.leaf = "merge_requests";
        spec.item_param = "iid";
        spec.id_field = "iid";
        spec.flags = "LCGUD";
        spec.create_defaults = json{{"state", "open"}, {"merged", false}, {"description", ""},
                                    {"approved_by", json::array()}, {"notes", json::array()}};
        add_crud(routes, spec);
    }

    add_route(routes, "PUT", "/api/projects/{id}/merge_requests/{iid}/merge", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  json* mr = find_item((*project)["merge_requests"], "iid", p.path.at("iid"));
                  if (!mr) return error_response(404, "not_found", "no such merge request");
                  if (mr->value("merged", false)) {
                      return error_response(409, "conflict", "merge request is already merged");
                  }
                  (*mr)["merged"] = true;
                  (*mr)["state"] = "merged";
                  state.log_mutation("update", "/api/projects/{id}/merge_requests/{iid}/merge",
                                     json{{"iid", (*mr)["iid"]}}, p.session.username);
                  return ApiResponse{200, *mr};
              });

    add_route(routes, "GET", "/api/projects/{id}/merge_requests/{iid}/commits", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  json* mr = find_item((*project)["merge_requests"], "iid", p.path.at("iid"));
                  if (!mr) return error_response(404, "not_found", "no such merge request");
                  json hits = json::array();
                  const json& commits = (*project)["commits"];
                  for (std::size_t i = 0; i < commits.size() && i < 5; ++i) {
                      hits.push_back(commits[i]);
                  }
                  return paginated(hits, p);
              });

    {
        CrudSpec spec;
        spec.collection_tmpl = "/api/projects/{id}/merge_requests/{iid}/notes";
        spec.steps = {{"projects", "id", "id"}, {"merge_requests", "iid", "iid"}};
        spec.leaf = "notes";
        spec.item_param = "note_id";
        spec.id_field = "note_id";
        spec.flags = "LC";
        add_crud(routes, spec);
    }

    add_route(routes, "POST", "/api/projects/{id}/merge_requests/{iid}/approve", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* project = find_project(state, p, &err);
                  if (!project) return err;
                  json* mr = find_item((*project)["merge_requests"], "iid", p.path.at("iid"));
                  if (!mr) return error_response(404, "not_found", "no such merge request");
                  json& approvers = (*mr)["approved_by"];
                  bool present = false;
                  for (const auto& u : approvers) present |= u == p.session.username;
                  if (!present) {
                      approvers.push_back(p.session.username);
                      state.log_mutation("update",
                                         "/api/projects/{id}/merge_requests/{iid}/approve",
                                         json{{"iid", (*mr)["iid"]}}, p.session.username);
                  }
                  return ApiResponse{200, *mr};
              });

    add_project_crud(routes, "milestones", "mid", "mid", "LC", "GUD");
    add_project_crud(routes, "labels", "name", "name", "LC", "GUD");
    add_project_crud(routes, "members", "username", "username", "LC", "GUD");
    add_project_crud(routes, "releases", "tag", "tag", "LC", "GUD");
    add_project_crud(routes, "pipelines", "pid", "pid", "LC", "GD");

    for (const char* op : {"cancel", "retry"}) {
        std::string status = std::string(op) == "cancel" ? "canceled" : "running";
        add_route(routes, "POST", std::string("/api/projects/{id}/pipelines/{pid}/") + op, true,
                  [status](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* project = find_project(state, p, &err);
                      if (!project) return err;
                      json* pipeline = find_item((*project)["pipelines"], "pid", p.path.at("pid"));
                      if (!pipeline) return error_response(404, "not_found", "no such pipeline");
                      (*pipeline)["status"] = status;
                      state.log_mutation("update", "/api/projects/{id}/pipelines/{pid}",
                                         json{{"pid", (*pipeline)["pid"]}, {"status", status}},
                                         p.session.username);
                      return ApiResponse{200, *pipeline};
                  });
    }

    add_project_crud(routes, "hooks", "hook_id", "hook_id", "LC", "GUD");
    add_project_crud(routes, "snippets", "sid", "sid", "LC", "GUD");
    add_project_crud(routes, "environments", "eid", "eid", "LC", "GUD");

    return routes;
}

// ---- pages ----

browse::Element gitforge_home(const SiteState& state, const RouteParams&) {
    browse::Element root = el("generic", "Gitforge");
    root.children.push_back(heading("Gitforge"));
    root.children.push_back(text("Projects hosted on this instance"));
    browse::Element projects = el("list", "projects");
    for (const auto& project : state.data()["projects"]) {
        std::string pid = id_text(project["id"]);
        browse::Element item = el("listitem", pid);
        item.children.push_back(link(project.value("name", pid), "/p/" + pid));
        item.children.push_back(text(std::to_string(project.value("stars", 0)) + " stars"));
        projects.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(projects));
    return root;
}

browse::Element gitforge_project(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "project");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        root.children.push_back(text("No project " + p.path.at("id")));
        return root;
    }
    std::string pid = p.path.at("id");
    root.children.push_back(heading(project->value("name", pid)));
    root.children.push_back(text(project->value("description", "")));
    root.children.push_back(text(std::to_string(project->value("stars", 0)) + " stars"));
    browse::Element nav = el("list", "project navigation");
    auto add_nav = [&](const std::string& label, const std::string& path) {
        browse::Element item = el("listitem", label);
        item.children.push_back(link(label, path));
        nav.children.push_back(std::move(item));
    };
    add_nav("Commits", "/p/" + pid + "/commits");
    add_nav("Contributors", "/p/" + pid + "/contributors");
    add_nav("Issues", "/p/" + pid + "/issues");
    add_nav("Merge requests", "/p/" + pid + "/merge_requests");
    add_nav("Branches", "/p/" + pid + "/branches");
    root.children.push_back(std::move(nav));
    return root;
}

browse::Element gitforge_commits(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "commits");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    const json& commits = (*project)["commits"];
    root.children.push_back(heading("Commits for " + project->value("name", p.path.at("id"))));
    root.children.push_back(text(std::to_string(commits.size()) + " commits, newest first"));
    browse::Element list = el("list", "commit list");
    for (const auto& commit : commits) {
        browse::Element item = el("listitem", "commit " + commit.value("sha", ""));
        item.children.push_back(text(commit.value("message", "")));
        item.children.push_back(text("authored by " + commit.value("author", "")));
        item.children.push_back(text(commit.value("sha", "") + " on " +
                                     commit.value("created_at", "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element gitforge_contributors(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "contributors");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    root.children.push_back(
        heading("Contributors to " + project->value("name", p.path.at("id"))));
    json rows = derive_contributors(*project, state.data()["users"]);
    browse::Element list = el("list", "contributor list");
    for (const auto& row : rows) {
        browse::Element item = el("listitem", row.value("username", ""));
        item.children.push_back(text(row.value("name", "") + " (" + row.value("username", "") +
                                     ") - " + std::to_string(row.value("commits", 0)) +
                                     " commits"));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element gitforge_issues(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "issues");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    std::string pid = p.path.at("id");
    root.children.push_back(heading("Issues for " + project->value("name", pid)));
    root.children.push_back(link("New issue", "/p/" + pid + "/issues/new"));
    browse::Element list = el("list", "issue list");
    for (const auto& issue : (*project)["issues"]) {
        std::string iid = id_text(issue["iid"]);
        browse::Element item = el("listitem", "issue " + iid);
        item.children.push_back(link(issue.value("title", ""),
                                     "/p/" + pid + "/issues/" + iid));
        item.children.push_back(text("#" + iid + " " + issue.value("state", "open") +
                                     ", opened by " + issue.value("author", "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element gitforge_issue_new(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "new issue");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    std::string pid = p.path.at("id");
    root.children.push_back(heading("New issue for " + project->value("name", pid)));
    browse::Element form = el("form", "new issue form");
    form.children.push_back(textbox("Title"));
    form.children.push_back(textbox("Description"));
    form.children.push_back(button(
        "Create issue", json{{"method", "POST"},
                             {"path", "/p/" + pid + "/issues"},
                             {"fields_by_name",
                              json{{"title", "Title"}, {"body", "Description"}}}}));
    root.children.push_back(std::move(form));
    return root;
}

browse::Element gitforge_issue(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "issue");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    const json* issue = find_item((*project)["issues"], "iid", p.path.at("iid"));
    if (!issue) {
        root.children.push_back(heading("404 Not Found"));
        root.children.push_back(text("No issue #" + p.path.at("iid")));
        return root;
    }
    root.children.push_back(heading(issue->value("title", "")));
    root.children.push_back(text("state: " + issue->value("state", "")));
    root.children.push_back(text(issue->value("description", "")));
    browse::Element notes = el("list", "notes");
    for (const auto& note : (*issue)["notes"]) {
        browse::Element item = el("listitem", "note");
        item.children.push_back(text(note.value("body", "") + " - " + note.value("author", "")));
        notes.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(notes));
    return root;
}

browse::Element gitforge_merge_requests(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "merge requests");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    root.children.push_back(
        heading("Merge requests for " + project->value("name", p.path.at("id"))));
    browse::Element list = el("list", "merge request list");
    for (const auto& mr : (*project)["merge_requests"]) {
        browse::Element item = el("listitem", "mr " + id_text(mr["iid"]));
        item.children.push_back(text(mr.value("title", "") + " (" + mr.value("state", "") +
                                     ") by " + mr.value("author", "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element gitforge_branches(const SiteState& state, const RouteParams& p) {
    const json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    browse::Element root = el("generic", "branches");
    if (!project) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    root.children.push_back(heading("Branches for " + project->value("name", p.path.at("id"))));
    browse::Element list = el("list", "branch list");
    for (const auto& branch : (*project)["branches"]) {
        browse::Element item = el("listitem", branch.value("name", ""));
        item.children.push_back(text(branch.value("name", "") +
                                     (branch.value("protected", false) ? " (protected)" : "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element gitforge_user(const SiteState& state, const RouteParams& p) {
    const json* user = find_item(state.data()["users"], "username", p.path.at("username"));
    browse::Element root = el("generic", "user");
    if (!user) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    root.children.push_back(heading(user->value("name", "")));
    root.children.push_back(text("@" + user->value("username", "")));
    root.children.push_back(text("member since " + user->value("joined", "")));
    return root;
}

browse::Element gitforge_search(const SiteState& state, const RouteParams& p) {
    browse::Element root = el("generic", "search");
    std::string q = p.query.count("q") ? p.query.at("q") : "";
    root.children.push_back(heading("Search results for '" + q + "'"));
    browse::Element list = el("list", "results");
    std::string lowered = to_lower(q);
    for (const auto& project : state.data()["projects"]) {
        std::string hay = to_lower(project.value("id", "") + " " + project.value("name", "") +
                                   " " + project.value("description", ""));
        if (!lowered.empty() && hay.find(lowered) != std::string::npos) {
            browse::Element item = el("listitem", project["id"].get<std::string>());
            item.children.push_back(link(project["name"].get<std::string>(),
                                         "/p/" + project["id"].get<std::string>()));
            list.children.push_back(std::move(item));
        }
    }
    root.children.push_back(std::move(list));
    return root;
}

std::string gitforge_issue_submit(SiteState& state, const RouteParams& p) {
    json* project = find_item(state.data()["projects"], "id", p.path.at("id"));
    if (!project) return "/";
    json& issues = (*project)["issues"];
    long long iid = 1;
    for (const auto& issue : issues) {
        iid = std::max(iid, issue.value("iid", 0LL) + 1);
    }
    json issue{{"iid", iid},
               {"title", p.body.value("title", "")},
               {"description", p.body.value("body", "")},
               {"state", "open"},
               {"author", p.session.username},
               {"labels", json::array()},
               {"notes", json::array()}};
    issues.push_back(issue);
    state.log_mutation("create", "/p/{id}/issues", json{{"iid", iid}}, p.session.username);
    return "/p/" + p.path.at("id") + "/issues";
}

} // namespace

SiteFixture make_gitforge(const std::string& data_dir) {
    SiteFixture fixture;
    fixture.site_id = "gitforge";
    fixture.tier = catalog::QualityTier::good;
    fixture.seed = load_seed(data_dir + "/seeds/gitforge.json");
    fixture.docs_text = slurp_file(data_dir + "/docs/gitforge_openapi.yaml");
    fixture.docs_format = "openapi";
    fixture.username = "webuser";
    fixture.access_token = "tok-gitforge-5f2a8c91d304";
    fixture.api_routes = gitforge_routes();

    fixture.page_routes = {
        {"/", gitforge_home},
        {"/p/{id}", gitforge_project},
        {"/p/{id}/commits", gitforge_commits},
        {"/p/{id}/contributors", gitforge_contributors},
        {"/p/{id}/issues", gitforge_issues},
        {"/p/{id}/issues/new", gitforge_issue_new},
        {"/p/{id}/issues/{iid}", gitforge_issue},
        {"/p/{id}/merge_requests", gitforge_merge_requests},
        {"/p/{id}/branches", gitforge_branches},
        {"/u/{username}", gitforge_user},
        {"/search", gitforge_search},
    };
    fixture.page_submits = {
        {"POST", "/p/{id}/issues", gitforge_issue_submit},
    };
    return fixture;
}

} // namespace webagents::sim
