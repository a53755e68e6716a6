#include <algorithm>

#include "simsite_internal.hpp"
#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::sim {

using namespace detail;

namespace {

json sorted_by(const json& items, const std::string& field, bool descending) {
    std::vector<json> rows(items.begin(), items.end());
    std::stable_sort(rows.begin(), rows.end(), [&](const json& a, const json& b) {
        const json& va = a.at(field);
        const json& vb = b.at(field);
        if (descending) return va > vb;
        return va < vb;
    });
    json out = json::array();
    for (auto& row : rows) out.push_back(std::move(row));
    return out;
}

json* find_post(SiteState& state, const std::string& id, ApiResponse* err) {
    json* post = find_item(state.data()["posts"], "id", id);
    if (!post) *err = error_response(404, "not_found", "no post '" + id + "'");
    return post;
}

struct CommentRef {
    json* post = nullptr;
    json* comment = nullptr;
    std::size_t index = 0;
};

CommentRef find_comment(SiteState& state, const std::string& id) {
    for (auto& post : state.data()["posts"]) {
        json& comments = post["comments"];
        for (std::size_t i = 0; i < comments.size(); ++i) {
            if (id_text(comments[i]["id"]) == id) {
                return {&post, &comments[i], i};
            }
        }
    }
    return {};
}

int score_of(const json& post) {
    return post.value("ups", 0) - post.value("downs", 0);
}

ApiResponse vote_on(json& entity, const std::string& direction) {
    if (direction == "up") {
        entity["ups"] = entity.value("ups", 0) + 1;
    } else if (direction == "down") {
        entity["downs"] = entity.value("downs", 0) + 1;
    } else {
        return error_response(400, "bad_request", "direction must be \"up\" or \"down\"");
    }
    return {200, entity};
}

std::string next_created_at(const SiteState& state) {
    // Deterministic timestamps for created content: later than every seeded
    // record, strictly increasing with the mutation log.
    return "2024-08-01T00:" + std::to_string(state.mutation_count() / 60) + ":" +
           std::to_string(state.mutation_count() % 60) + ":00Z";
}

json make_post(SiteState& state, const std::string& forum, const std::string& title,
               const std::string& body, const std::string& author) {
    json& posts = state.data()["posts"];
    long long id = 1;
    for (const auto& post : posts) id = std::max(id, post.value("id", 0LL) + 1);
    json post{{"id", id},       {"forum", forum},
              {"title", title}, {"body", body},
              {"author", author}, {"ups", 0},
              {"downs", 0},     {"comments", json::array()},
              {"created_at", next_created_at(state)}};
    posts.push_back(post);
    state.log_mutation("create", "/api/posts", json{{"id", id}}, author);
    return post;
}

std::vector<RouteSpec> forum_base_routes() {
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

    add_route(routes, "GET", "/api/stats", false, [](SiteState& state, const RouteParams&) {
        json rows = json::array();
        for (const auto& forum : state.data()["forums"]) {
            int posts = 0;
            int comments = 0;
            for (const auto& post : state.data()["posts"]) {
                if (post["forum"] == forum["name"]) {
                    ++posts;
                    comments += static_cast<int>(post["comments"].size());
                }
            }
            rows.push_back(json{{"name", forum["name"]}, {"posts", posts},
                                {"comments", comments}});
        }
        return ApiResponse{200, json{{"forums", rows}}};
    });

    add_crud(routes, {"/api/forums", {}, "forums", "name", "name", "LCG"});

    add_route(routes, "GET", "/api/forums/{name}/posts", false,
              [](SiteState& state, const RouteParams& p) {
                  if (!find_item(state.data()["forums"], "name", p.path.at("name"))) {
                      return error_response(404, "not_found", "no such forum");
                  }
                  json hits = json::array();
                  for (const auto& post : state.data()["posts"]) {
                      if (post["forum"] == p.path.at("name")) hits.push_back(post);
                  }
                  return paginated(sorted_by(hits, "created_at", true), p);
              });

    add_route(routes, "GET", "/api/posts", false, [](SiteState& state, const RouteParams& p) {
        return paginated(sorted_by(state.data()["posts"], "created_at", true), p);
    });

    add_route(routes, "POST", "/api/posts", true, [](SiteState& state, const RouteParams& p) {
        if (!p.body.is_object() || !p.body.contains("forum") || !p.body.contains("title")) {
            return error_response(400, "bad_request", "body must include forum and title");
        }
        if (!find_item(state.data()["forums"], "name", p.body["forum"].get<std::string>())) {
            return error_response(404, "not_found", "no such forum");
        }
        json post = make_post(state, p.body["forum"], p.body["title"],
                              p.body.value("body", ""), p.session.username);
        return ApiResponse{201, post};
    });

    add_crud(routes, {"/api/posts", {}, "posts", "id", "id", "GUD"});

    add_route(routes, "GET", "/api/posts/{id}/comments", false,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* post = find_post(state, p.path.at("id"), &err);
                  if (!post) return err;
                  return paginated((*post)["comments"], p);
              });

    add_route(routes, "POST", "/api/posts/{id}/comments", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* post = find_post(state, p.path.at("id"), &err);
                  if (!post) return err;
                  if (!p.body.is_object() || !p.body.contains("body")) {
                      return error_response(400, "bad_request", "body must include 'body'");
                  }
                  long long id = 1;
                  for (const auto& other : state.data()["posts"]) {
                      for (const auto& comment : other["comments"]) {
                          id = std::max(id, comment.value("id", 0LL) + 1);
                      }
                  }
                  json comment{{"id", id},
                               {"author", p.session.username},
                               {"body", p.body["body"]},
                               {"ups", 0},
                               {"downs", 0},
                               {"created_at", next_created_at(state)}};
                  (*post)["comments"].push_back(comment);
                  state.log_mutation("create", "/api/posts/{id}/comments",
                                     json{{"id", id}, {"post_id", (*post)["id"]}},
                                     p.session.username);
                  return ApiResponse{201, comment};
              });

    add_route(routes, "GET", "/api/comments/{id}", false,
              [](SiteState& state, const RouteParams& p) {
                  CommentRef ref = find_comment(state, p.path.at("id"));
                  if (!ref.comment) return error_response(404, "not_found", "no such comment");
                  json out = *ref.comment;
                  out["post_id"] = (*ref.post)["id"];
                  return ApiResponse{200, out};
              });

    add_crud(routes, {"/api/users", {}, "users", "username", "username", "LG"});

    add_route(routes, "GET", "/api/users/{username}/posts", false,
              [](SiteState& state, const RouteParams& p) {
                  json hits = json::array();
                  for (const auto& post : state.data()["posts"]) {
                      if (post["author"] == p.path.at("username")) hits.push_back(post);
                  }
                  return paginated(sorted_by(hits, "created_at", true), p);
              });

    return routes;
}

std::vector<RouteSpec> forum_expansion_routes() {
    std::vector<RouteSpec> routes;

    add_route(routes, "POST", "/api/posts/{id}/vote", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* post = find_post(state, p.path.at("id"), &err);
                  if (!post) return err;
                  std::string direction = p.body.is_object() ? p.body.value("direction", "") : "";
                  ApiResponse res = vote_on(*post, direction);
                  if (res.status == 200) {
                      state.data()["votes"].push_back(json{{"post_id", (*post)["id"]},
                                                           {"user", p.session.username},
                                                           {"direction", direction}});
                      state.log_mutation("create", "/api/posts/{id}/vote",
                                         json{{"post_id", (*post)["id"]},
                                              {"direction", direction}},
                                         p.session.username);
                  }
                  return res;
              });

    add_route(routes, "POST", "/api/comments/{id}/vote", true,
              [](SiteState& state, const RouteParams& p) {
                  CommentRef ref = find_comment(state, p.path.at("id"));
                  if (!ref.comment) return error_response(404, "not_found", "no such comment");
                  std::string direction = p.body.is_object() ? p.body.value("direction", "") : "";
                  ApiResponse res = vote_on(*ref.comment, direction);
                  if (res.status == 200) {
                      state.data()["votes"].push_back(json{{"comment_id", (*ref.comment)["id"]},
                                                           {"user", p.session.username},
                                                           {"direction", direction}});
                      state.log_mutation("create", "/api/comments/{id}/vote",
                                         json{{"comment_id", (*ref.comment)["id"]},
                                              {"direction", direction}},
                                         p.session.username);
                  }
                  return res;
              });

    add_route(routes, "GET", "/api/search", false, [](SiteState& state, const RouteParams& p) {
        auto q_it = p.query.find("q");
        if (q_it == p.query.end() || q_it->second.empty()) {
            return error_response(400, "bad_request", "missing query parameter 'q'");
        }
        std::string q = to_lower(q_it->second);
        json hits = json::array();
        for (const auto& post : state.data()["posts"]) {
            std::string hay = to_lower(post.value("title", "") + " " + post.value("body", ""));
            if (hay.find(q) != std::string::npos) {
                json hit = post;
                hit["kind"] = "post";
                hits.push_back(hit);
            }
            for (const auto& comment : post["comments"]) {
                if (to_lower(comment.value("body", "")).find(q) != std::string::npos) {
                    json hit = comment;
                    hit["kind"] = "comment";
                    hit["post_id"] = post["id"];
                    hits.push_back(hit);
                }
            }
        }
        return paginated(hits, p);
    });

    add_route(routes, "GET", "/api/users/{username}/comments", false,
              [](SiteState& state, const RouteParams& p) {
                  json hits = json::array();
                  for (const auto& post : state.data()["posts"]) {
                      for (const auto& comment : post["comments"]) {
                          if (comment["author"] == p.path.at("username")) {
                              json hit = comment;
                              hit["post_id"] = post["id"];
                              hits.push_back(hit);
                          }
                      }
                  }
                  return paginated(sorted_by(hits, "created_at", true), p);
              });

    add_route(routes, "DELETE", "/api/comments/{id}", true,
              [](SiteState& state, const RouteParams& p) {
                  CommentRef ref = find_comment(state, p.path.at("id"));
                  if (!ref.comment) return error_response(404, "not_found", "no such comment");
                  if ((*ref.comment)["author"] != p.session.username) {
                      return error_response(403, "forbidden",
                                            "only the comment author may delete it");
                  }
                  (*ref.post)["comments"].erase(ref.index);
                  state.log_mutation("delete", "/api/comments/{id}",
                                     json{{"id", p.path.at("id")}}, p.session.username);
                  return ApiResponse{200, json::object()};
              });

    add_route(routes, "PUT", "/api/comments/{id}", true,
              [](SiteState& state, const RouteParams& p) {
                  CommentRef ref = find_comment(state, p.path.at("id"));
                  if (!ref.comment) return error_response(404, "not_found", "no such comment");
                  if ((*ref.comment)["author"] != p.session.username) {
                      return error_response(403, "forbidden",
                                            "only the comment author may edit it");
                  }
                  (*ref.comment)["body"] = p.body.is_object() ? p.body.value("body", "") : "";
                  state.log_mutation("update", "/api/comments/{id}",
                                     json{{"id", p.path.at("id")}}, p.session.username);
                  return ApiResponse{200, *ref.comment};
              });

    add_route(routes, "GET", "/api/forums/{name}/top", false,
              [](SiteState& state, const RouteParams& p) {
                  if (!find_item(state.data()["forums"], "name", p.path.at("name"))) {
                      return error_response(404, "not_found", "no such forum");
                  }
                  std::vector<json> rows;
                  for (const auto& post : state.data()["posts"]) {
                      if (post["forum"] == p.path.at("name")) rows.push_back(post);
                  }
                  std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
                      return score_of(a) > score_of(b);
                  });
                  json hits = json::array();
                  for (auto& row : rows) hits.push_back(std::move(row));
                  return paginated(hits, p);
              });

    add_route(routes, "POST", "/api/forums/{name}/subscribe", true,
              [](SiteState& state, const RouteParams& p) {
                  if (!find_item(state.data()["forums"], "name", p.path.at("name"))) {
                      return error_response(404, "not_found", "no such forum");
                  }
                  json sub{{"forum", p.path.at("name")}, {"user", p.session.username}};
                  state.data()["subscriptions"].push_back(sub);
                  state.log_mutation("create", "/api/forums/{name}/subscribe", sub,
                                     p.session.username);
                  return ApiResponse{201, sub};
              });

    add_route(routes, "DELETE", "/api/forums/{name}/subscribe", true,
              [](SiteState& state, const RouteParams& p) {
                  json& subs = state.data()["subscriptions"];
                  for (std::size_t i = 0; i < subs.size(); ++i) {
                      if (subs[i]["forum"] == p.path.at("name") &&
                          subs[i]["user"] == p.session.username) {
                          subs.erase(i);
                          state.log_mutation("delete", "/api/forums/{name}/subscribe",
                                             json{{"forum", p.path.at("name")}},
                                             p.session.username);
                          return ApiResponse{200, json::object()};
                      }
                  }
                  return error_response(404, "not_found", "no such subscription");
              });

    add_route(routes, "GET", "/api/users/{username}/overview", false,
              [](SiteState& state, const RouteParams& p) {
                  json hits = json::array();
                  for (const auto& post : state.data()["posts"]) {
                      if (post["author"] == p.path.at("username")) {
                          json hit = post;
                          hit["kind"] = "post";
                          hits.push_back(hit);
                      }
                      for (const auto& comment : post["comments"]) {
                          if (comment["author"] == p.path.at("username")) {
                              json hit = comment;
                              hit["kind"] = "comment";
                              hit["post_id"] = post["id"];
                              hits.push_back(hit);
                          }
                      }
                  }
                  return paginated(sorted_by(hits, "created_at", true), p);
              });

    add_route(routes, "POST", "/api/posts/{id}/save", true,
              [](SiteState& state, const RouteParams& p) {
                  ApiResponse err;
                  json* post = find_post(state, p.path.at("id"), &err);
                  if (!post) return err;
                  json saved{{"post_id", (*post)["id"]}, {"user", p.session.username}};
                  state.data()["saved"].push_back(saved);
                  state.log_mutation("create", "/api/posts/{id}/save", saved, p.session.username);
                  return ApiResponse{201, saved};
              });

    add_route(routes, "GET", "/api/user/saved", true,
              [](SiteState& state, const RouteParams& p) {
                  json hits = json::array();
                  for (const auto& saved : state.data()["saved"]) {
                      if (saved["user"] != p.session.username) continue;
                      if (const json* post = find_item(state.data()["posts"], "id",
                                                       id_text(saved["post_id"]))) {
                          hits.push_back(*post);
                      }
                  }
                  return paginated(hits, p);
              });

    add_route(routes, "POST", "/api/messages", true,
              [](SiteState& state, const RouteParams& p) {
                  if (!p.body.is_object() || !p.body.contains("to") || !p.body.contains("body")) {
                      return error_response(400, "bad_request", "body must include to and body");
                  }
                  if (!find_item(state.data()["users"], "username",
                                 p.body["to"].get<std::string>())) {
                      return error_response(404, "not_found", "no such recipient");
                  }
                  json message{{"from", p.session.username},
                               {"to", p.body["to"]},
                               {"body", p.body["body"]}};
                  state.data()["messages"].push_back(message);
                  state.log_mutation("create", "/api/messages", message, p.session.username);
                  return ApiResponse{201, message};
              });

    return routes;
}

// ---- pages ----

browse::Element forum_home(const SiteState& state, const RouteParams&) {
    browse::Element root = el("generic", "Forum");
    root.children.push_back(heading("Forum"));
    browse::Element forums = el("list", "forums");
    for (const auto& forum : state.data()["forums"]) {
        std::string fname = id_text(forum["name"]);
        browse::Element item = el("listitem", fname);
        item.children.push_back(link("f/" + fname, "/f/" + fname));
        item.children.push_back(text(forum.value("description", "")));
        forums.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(forums));
    root.children.push_back(heading("Latest posts"));
    json latest = sorted_by(state.data()["posts"], "created_at", true);
    browse::Element list = el("list", "latest posts");
    for (std::size_t i = 0; i < latest.size() && i < 10; ++i) {
        const json& post = latest[i];
        browse::Element item = el("listitem", "post " + id_text(post["id"]));
        item.children.push_back(link(post.value("title", ""), "/post/" + id_text(post["id"])));
        item.children.push_back(text("in f/" + post.value("forum", "") + " by " +
                                     post.value("author", "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    root.children.push_back(link("Submit a new post", "/submit"));
    return root;
}

browse::Element forum_forum(const SiteState& state, const RouteParams& p) {
    const json* forum = find_item(state.data()["forums"], "name", p.path.at("name"));
    browse::Element root = el("generic", "forum");
    if (!forum) {
        root.children.push_back(heading("404 Not Found"));
        return root;
    }
    root.children.push_back(heading(forum->value("title", "")));
    root.children.push_back(text(forum->value("description", "")));
    json hits = json::array();
    for (const auto& post : state.data()["posts"]) {
        if (post["forum"] == p.path.at("name")) hits.push_back(post);
    }
    hits = sorted_by(hits, "created_at", true);
    browse::Element list = el("list", "posts");
    for (const auto& post : hits) {
        browse::Element item = el("listitem", "post " + id_text(post["id"]));
        item.children.push_back(link(post.value("title", ""), "/post/" + id_text(post["id"])));
        item.children.push_back(text("score " + std::to_string(score_of(post)) + ", by " +
                                     post.value("author", "")));
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element forum_post(const SiteState& state, const RouteParams& p) {
    const json* post = find_item(state.data()["posts"], "id", p.path.at("id"));
    browse::Element root = el("generic", "post");
    if (!post) {
        root.children.push_back(heading("404 Not Found"));
        root.children.push_back(text("No post " + p.path.at("id")));
        return root;
    }
    std::string pid = id_text((*post)["id"]);
    root.children.push_back(heading(post->value("title", "")));
    root.children.push_back(text(post->value("body", "")));
    root.children.push_back(text("submitted by " + post->value("author", "") + " in f/" +
                                 post->value("forum", "")));
    root.children.push_back(text("score: " + std::to_string(score_of(*post)) + " (" +
                                 std::to_string(post->value("ups", 0)) + " up, " +
                                 std::to_string(post->value("downs", 0)) + " down)"));
    root.children.push_back(button("Upvote", json{{"method", "POST"},
                                                  {"path", "/post/" + pid + "/vote"},
                                                  {"data", json{{"direction", "up"}}}}));
    root.children.push_back(button("Downvote", json{{"method", "POST"},
                                                    {"path", "/post/" + pid + "/vote"},
                                                    {"data", json{{"direction", "down"}}}}));
    root.children.push_back(heading("Comments"));
    browse::Element list = el("list", "comments");
    for (const auto& comment : (*post)["comments"]) {
        browse::Element item = el("listitem", "comment " + id_text(comment["id"]));
        item.children.push_back(text(comment.value("body", "")));
        item.children.push_back(text("by " + comment.value("author", "")));
        if (comment.value("author", "") == p.session.username) {
            item.children.push_back(button(
                "Delete comment",
                json{{"method", "POST"},
                     {"path", "/comment/" + id_text(comment["id"]) + "/delete"}}));
        }
        list.children.push_back(std::move(item));
    }
    root.children.push_back(std::move(list));
    return root;
}

browse::Element forum_submit_page(const SiteState& state, const RouteParams&) {
    browse::Element root = el("generic", "submit");
    root.children.push_back(heading("Submit a new post"));
    std::vector<std::string> forum_names;
    for (const auto& forum : state.data()["forums"]) {
        forum_names.push_back(id_text(forum["name"]));
    }
    browse::Element form = el("form", "new post form");
    form.children.push_back(combobox("Forum", forum_names,
                                     forum_names.empty() ? "" : forum_names.front()));
    form.children.push_back(textbox("Title"));
    form.children.push_back(textbox("Body"));
    form.children.push_back(button(
        "Submit post", json{{"method", "POST"},
                            {"path", "/submit"},
                            {"fields_by_name", json{{"forum", "Forum"},
                                                    {"title", "Title"},
                                                    {"body", "Body"}}}}));
    root.children.push_back(std::move(form));
    return root;
}

std::string forum_vote_submit(SiteState& state, const RouteParams& p) {
    ApiResponse err;
    json* post = find_post(state, p.path.at("id"), &err);
    if (!post) return "/";
    std::string direction = p.body.value("direction", "up");
    if (vote_on(*post, direction).status == 200) {
        state.data()["votes"].push_back(json{{"post_id", (*post)["id"]},
                                             {"user", p.session.username},
                                             {"direction", direction}});
        state.log_mutation("create", "/post/{id}/vote",
                           json{{"post_id", (*post)["id"]}, {"direction", direction}},
                           p.session.username);
    }
    return "/post/" + p.path.at("id");
}

std::string forum_comment_delete_submit(SiteState& state, const RouteParams& p) {
    CommentRef ref = find_comment(state, p.path.at("id"));
    if (!ref.comment) return "/";
    if ((*ref.comment)["author"] != p.session.username) {
        return "/post/" + id_text((*ref.post)["id"]);
    }
    std::string post_id = id_text((*ref.post)["id"]);
    (*ref.post)["comments"].erase(ref.index);
    state.log_mutation("delete", "/comment/{id}/delete", json{{"id", p.path.at("id")}},
                       p.session.username);
    return "/post/" + post_id;
}

std::string forum_post_submit(SiteState& state, const RouteParams& p) {
    std::string forum = p.body.value("forum", "");
    if (!find_item(state.data()["forums"], "name", forum)) return "/submit";
    json post = make_post(state, forum, p.body.value("title", ""), p.body.value("body", ""),
                          p.session.username);
    return "/post/" + id_text(post["id"]);
}

} // namespace

ExpansionPack forum_expansion(const std::string& data_dir) {
    ExpansionPack pack;
    pack.routes = forum_expansion_routes();
    pack.docs = slurp_file(data_dir + "/docs/forum_expansion.md");
    return pack;
}

SiteFixture make_forum(const std::string& data_dir, bool expanded) {
    SiteFixture fixture;
    fixture.site_id = "forum";
    fixture.tier = catalog::QualityTier::poor;
    fixture.seed = load_seed(data_dir + "/seeds/forum.json");
    fixture.docs_text = slurp_file(data_dir + "/docs/forum_base.md");
    fixture.docs_format = "readme";
    fixture.username = "webuser";
    fixture.access_token = "tok-forum-9b3e7d1a4c82";
    fixture.api_routes = forum_base_routes();

    fixture.page_routes = {
        {"/", forum_home},
        {"/f/{name}", forum_forum},
        {"/post/{id}", forum_post},
        {"/submit", forum_submit_page},
    };
    fixture.page_submits = {
        {"POST", "/post/{id}/vote", forum_vote_submit},
        {"POST", "/comment/{id}/delete", forum_comment_delete_submit},
        {"POST", "/submit", forum_post_submit},
    };

    if (expanded) {
        return apply_api_expansion(std::move(fixture), forum_expansion(data_dir));
    }
    return fixture;
}

} // namespace webagents::sim
