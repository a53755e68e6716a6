#include "webagents/simsite.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "simsite_internal.hpp"
#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::sim {

namespace detail {

browse::Element el(std::string role, std::string name) {
    browse::Element e;
    e.role = std::move(role);
    e.name = std::move(name);
    return e;
}

browse::Element text(std::string body) { return el("text", std::move(body)); }
browse::Element heading(std::string body) { return el("heading", std::move(body)); }

browse::Element link(std::string name, std::string target) {
    browse::Element e = el("link", std::move(name));
    e.target = std::move(target);
    return e;
}

browse::Element button(std::string name, json action) {
    browse::Element e = el("button", std::move(name));
    e.action = std::move(action);
    return e;
}

browse::Element textbox(std::string name, std::string value) {
    browse::Element e = el("textbox", std::move(name));
    e.value = std::move(value);
    return e;
}

browse::Element combobox(std::string name, std::vector<std::string> options, std::string value) {
    browse::Element e = el("combobox", std::move(name));
    e.options = std::move(options);
    e.value = std::move(value);
    return e;
}

std::string id_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

json* find_item(json& array, const std::string& id_field, const std::string& value) {
    if (!array.is_array()) return nullptr;
    for (auto& item : array) {
        if (item.is_object() && item.contains(id_field) && id_text(item[id_field]) == value) {
            return &item;
        }
    }
    return nullptr;
}

const json* find_item(const json& array, const std::string& id_field, const std::string& value) {
    return find_item(const_cast<json&>(array), id_field, value);
}

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
    return {status, json{{"error", code}, {"message", message}}};
}

json* resolve_parent(json& data, const std::vector<Step>& steps, const RouteParams& p,
                     ApiResponse* missing) {
    json* node = &data;
    for (const auto& step : steps) {
        auto param = p.path.find(step.param);
        if (param == p.path.end() || !node->contains(step.array_field)) {
            *missing = error_response(404, "not_found", "unknown " + step.array_field);
            return nullptr;
        }
        json* item = find_item((*node)[step.array_field], step.id_field, param->second);
        if (item == nullptr) {
            *missing = error_response(404, "not_found",
                                      "no " + step.array_field + " entry '" + param->second + "'");
            return nullptr;
        }
        node = item;
    }
    return node;
}

int page_number(const RouteParams& p) {
    auto it = p.query.find("page");
    if (it == p.query.end()) return 1;
    try {
        return std::max(1, std::stoi(it->second));
    } catch (const std::exception&) {
        return 1;
    }
}

ApiResponse paginated(const json& items, const RouteParams& p) {
    int page = page_number(p);
    std::size_t total = items.is_array() ? items.size() : 0;
    std::size_t begin = static_cast<std::size_t>(page - 1) * kPageSize;

    json slice = json::array();
    for (std::size_t i = begin; i < total && i < begin + kPageSize; ++i) {
        slice.push_back(items[i]);
    }
    json body{{"items", std::move(slice)},
              {"total", total},
              {"page", page},
              {"page_size", kPageSize}};
    return {200, std::move(body)};
}

void add_route(std::vector<RouteSpec>& routes, const std::string& method, const std::string& tmpl,
               bool requires_auth, ApiHandler handler) {
    RouteSpec spec;
    spec.id = catalog::EndpointId{method, tmpl};
    spec.requires_auth = requires_auth;
    spec.handler = std::move(handler);
    routes.push_back(std::move(spec));
}

namespace {

json& leaf_array(json& parent, const std::string& leaf) {
    if (!parent.contains(leaf) || !parent[leaf].is_array()) {
        parent[leaf] = json::array();
    }
    return parent[leaf];
}

json next_id(const json& array, const std::string& id_field) {
    long long max_id = 0;
    bool numeric = true;
    for (const auto& item : array) {
        if (!item.contains(id_field)) continue;
        if (item[id_field].is_number_integer()) {
            max_id = std::max(max_id, item[id_field].get<long long>());
        } else {
            numeric = false;
        }
    }
    if (!numeric && array.size() > 0) return json();
    return json(max_id + 1);
}

} // namespace

void add_crud(std::vector<RouteSpec>& routes, const CrudSpec& spec) {
    std::string item_tmpl = spec.collection_tmpl + "/{" + spec.item_param + "}";

    auto resolve = [spec](SiteState& state, const RouteParams& p,
                          ApiResponse* err) -> json* {
        return resolve_parent(state.data(), spec.steps, p, err);
    };

    if (spec.flags.find('L') != std::string::npos) {
        add_route(routes, "GET", spec.collection_tmpl, false,
                  [spec, resolve](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* parent = resolve(state, p, &err);
                      if (!parent) return err;
                      return paginated(leaf_array(*parent, spec.leaf), p);
                  });
    }
    if (spec.flags.find('C') != std::string::npos) {
        add_route(routes, "POST", spec.collection_tmpl, true,
                  [spec, resolve](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* parent = resolve(state, p, &err);
                      if (!parent) return err;
                      if (!p.body.is_object()) {
                          return error_response(400, "bad_request", "body must be a JSON object");
                      }
                      json& array = leaf_array(*parent, spec.leaf);
                      json item = p.body;
                      if (!item.contains(spec.id_field)) {
                          json assigned = next_id(array, spec.id_field);
                          if (assigned.is_null()) {
                              return error_response(400, "bad_request",
                                                    "body must include '" + spec.id_field + "'");
                          }
                          item[spec.id_field] = assigned;
                      } else if (find_item(array, spec.id_field, id_text(item[spec.id_field]))) {
                          return error_response(409, "conflict",
                                                spec.leaf + " entry already exists");
                      }
                      if (!item.contains("author") && !p.session.username.empty() &&
                          (spec.leaf == "issues" || spec.leaf == "notes" ||
                           spec.leaf == "comments" || spec.leaf == "posts")) {
                          item["author"] = p.session.username;
                      }
                      for (const auto& [k, v] : spec.create_defaults.items()) {
                          if (!item.contains(k)) item[k] = v;
                      }
                      array.push_back(item);
                      state.log_mutation("create", spec.collection_tmpl,
                                         json{{spec.id_field, item[spec.id_field]}},
                                         p.session.username);
                      return ApiResponse{201, item};
                  });
    }
    if (spec.flags.find('G') != std::string::npos) {
        add_route(routes, "GET", item_tmpl, false,
                  [spec, resolve](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* parent = resolve(state, p, &err);
                      if (!parent) return err;
                      json* item = find_item(leaf_array(*parent, spec.leaf), spec.id_field,
                                             p.path.at(spec.item_param));
                      if (!item) return error_response(404, "not_found", "no such " + spec.leaf);
                      return ApiResponse{200, *item};
                  });
    }
    if (spec.flags.find('U') != std::string::npos) {
        add_route(routes, "PUT", item_tmpl, true,
                  [spec, resolve, item_tmpl](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* parent = resolve(state, p, &err);
                      if (!parent) return err;
                      json* item = find_item(leaf_array(*parent, spec.leaf), spec.id_field,
                                             p.path.at(spec.item_param));
                      if (!item) return error_response(404, "not_found", "no such " + spec.leaf);
                      if (!p.body.is_object()) {
                          return error_response(400, "bad_request", "body must be a JSON object");
                      }
                      for (const auto& [k, v] : p.body.items()) {
                          if (k != spec.id_field) (*item)[k] = v;
                      }
                      state.log_mutation("update", item_tmpl,
                                         json{{spec.id_field, (*item)[spec.id_field]}},
                                         p.session.username);
                      return ApiResponse{200, *item};
                  });
    }
    if (spec.flags.find('D') != std::string::npos) {
        add_route(routes, "DELETE", item_tmpl, true,
                  [spec, resolve, item_tmpl](SiteState& state, const RouteParams& p) {
                      ApiResponse err;
                      json* parent = resolve(state, p, &err);
                      if (!parent) return err;
                      json& array = leaf_array(*parent, spec.leaf);
                      const std::string& wanted = p.path.at(spec.item_param);
                      for (std::size_t i = 0; i < array.size(); ++i) {
                          if (array[i].is_object() && array[i].contains(spec.id_field) &&
                              id_text(array[i][spec.id_field]) == wanted) {
                              array.erase(i);
                              state.log_mutation("delete", item_tmpl,
                                                 json{{spec.id_field, wanted}},
                                                 p.session.username);
                              return ApiResponse{200, json::object()};
                          }
                      }
                      return error_response(404, "not_found", "no such " + spec.leaf);
                  });
    }
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json load_seed(const std::string& path) {
    json seed = json::parse(slurp_file(path), nullptr, false);
    if (seed.is_discarded() || !seed.is_object() || !seed.contains("data")) {
        throw Error("seed file is not a {data, mutations} document: " + path);
    }
    if (!seed.contains("mutations")) seed["mutations"] = json::array();
    return seed;
}

} // namespace detail

using namespace detail;

// ---- SiteState ------------------------------------------------------------

SiteState::SiteState(json seed) : state_(std::move(seed)) {
    if (!state_.contains("data")) state_["data"] = json::object();
    if (!state_.contains("mutations")) state_["mutations"] = json::array();
}

void SiteState::log_mutation(const std::string& op, const std::string& target, json detail,
                             const std::string& actor) {
    json record{{"seq", state_["mutations"].size()},
                {"op", op},
                {"target", target},
                {"detail", std::move(detail)},
                {"actor", actor}};
    state_["mutations"].push_back(std::move(record));
}

// ---- fixtures --------------------------------------------------------------

SiteFixture make_site(const std::string& site_id, const std::string& data_dir, bool expanded) {
    if (site_id == "gitforge") return make_gitforge(data_dir);
    if (site_id == "forum") return make_forum(data_dir, expanded);
    if (site_id == "shop") return make_shop(data_dir);
    throw Error("unknown site id: " + site_id);
}

SiteFixture apply_api_expansion(SiteFixture fixture, const ExpansionPack& pack) {
    for (const auto& route : pack.routes) {
        for (const auto& existing : fixture.api_routes) {
            if (existing.id == route.id) {
                throw DuplicateEndpoint("expansion repeats endpoint " + route.id.canonical());
            }
        }
    }
    for (const auto& route : pack.routes) fixture.api_routes.push_back(route);
    if (!pack.docs.empty()) {
        fixture.docs_text += "\n" + pack.docs;
    }
    return fixture;
}

catalog::ApiCatalog parse_fixture_docs(const SiteFixture& fixture) {
    if (fixture.docs_format == "openapi") {
        return catalog::parse_openapi(fixture.docs_text, fixture.site_id, fixture.tier);
    }
    return catalog::parse_readme(fixture.docs_text, fixture.site_id, fixture.tier);
}

// ---- Site -------------------------------------------------------------------

namespace {

bool match_template(const std::string& tmpl, const std::string& path,
                    std::map<std::string, std::string>& params) {
    std::vector<std::string> tparts;
    std::vector<std::string> pparts;
    std::stringstream ts(tmpl);
    std::stringstream ps(path);
    std::string seg;
    while (std::getline(ts, seg, '/')) tparts.push_back(seg);
    while (std::getline(ps, seg, '/')) pparts.push_back(seg);
    if (tparts.size() != pparts.size()) return false;
    std::map<std::string, std::string> captured;
    for (std::size_t i = 0; i < tparts.size(); ++i) {
        const std::string& t = tparts[i];
        if (t.size() >= 2 && t.front() == '{' && t.back() == '}') {
            if (pparts[i].empty()) return false;
            captured[t.substr(1, t.size() - 2)] = pparts[i];
        } else if (t != pparts[i]) {
            return false;
        }
    }
    params = std::move(captured);
    return true;
}

std::pair<std::string, std::map<std::string, std::string>> split_query(const std::string& target) {
    std::size_t q = target.find('?');
    if (q == std::string::npos) return {target, {}};
    std::string path = target.substr(0, q);
    std::map<std::string, std::string> query;
    std::string rest = target.substr(q + 1);
    std::stringstream ss(rest);
    std::string pair;
    while (std::getline(ss, pair, '&')) {
        std::size_t eq = pair.find('=');
        if (eq == std::string::npos) {
            query[pair] = "";
        } else {
            query[pair.substr(0, eq)] = pair.substr(eq + 1);
        }
    }
    return {path, query};
}

} // namespace

Site::Site(SiteFixture fixture, std::string base_url)
    : fixture_(std::move(fixture)), base_url_(normalize_url(base_url)), state_(fixture_.seed) {}

std::string Site::strip_to_path(const std::string& url_or_path) const {
    std::string path = url_or_path;
    if (path.rfind(base_url_, 0) == 0) {
        path = path.substr(base_url_.size());
    } else if (path.rfind("http://", 0) == 0 || path.rfind("https://", 0) == 0) {
        std::size_t host_end = path.find('/', path.find("://") + 3);
        path = host_end == std::string::npos ? "/" : path.substr(host_end);
    }
    if (path.empty()) path = "/";
    return path;
}

ApiResponse Site::serve_api(const ApiRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);

    auto [path, url_query] = split_query(request.path);
    while (path.size() > 1 && path.back() == '/') path.pop_back();

    std::string token;
    auto auth = request.headers.find("Authorization");
    if (auth != request.headers.end() && auth->second.rfind("Bearer ", 0) == 0) {
        token = auth->second.substr(7);
    }
    bool authed = !token.empty() && token == fixture_.access_token;

    for (const auto& route : fixture_.api_routes) {
        if (route.id.method != to_upper(request.method)) continue;
        std::map<std::string, std::string> params;
        if (!match_template(route.id.path_template, path, params)) continue;

        if (route.requires_auth && !authed) {
            return error_response(401, "unauthorized",
                                  "this endpoint requires a valid access token");
        }
        RouteParams p;
        p.path = std::move(params);
        p.query = request.query;
        for (const auto& [k, v] : url_query) p.query.emplace(k, v);
        if (!request.body.empty()) {
            p.body = json::parse(request.body, nullptr, false);
            if (p.body.is_discarded()) {
                return error_response(400, "bad_request", "request body is not valid JSON");
            }
        }
        p.session.username = authed ? fixture_.username : "";
        return route.handler(state_, p);
    }
    return error_response(404, "not_found",
                          "no route for " + to_upper(request.method) + " " + path);
}

browse::PageModel Site::finish_page(const std::string& path, browse::Element root) {
    browse::PageModel page;
    page.url = base_url_ + path;
    page.root = std::move(root);
    browse::assign_bids(page);

    // Resolve form descriptors that name their inputs: {"fields_by_name":
    // {field: element-name}} becomes {"fields": {bid: field}}.
    std::function<void(browse::Element&)> fixup = [&](browse::Element& e) {
        if (e.action && e.action->contains("fields_by_name")) {
            json fields = json::object();
            for (const auto& [field, el_name] : (*e.action)["fields_by_name"].items()) {
                std::function<const browse::Element*(const browse::Element&)> find_named =
                    [&](const browse::Element& node) -> const browse::Element* {
                    if (node.name == el_name.get<std::string>() && node.role != "button") {
                        return &node;
                    }
                    for (const auto& child : node.children) {
                        if (const browse::Element* hit = find_named(child)) return hit;
                    }
                    return nullptr;
                };
                if (const browse::Element* input = find_named(page.root)) {
                    fields[input->bid] = field;
                }
            }
            (*e.action)["fields"] = std::move(fields);
            e.action->erase("fields_by_name");
        }
        for (auto& child : e.children) fixup(child);
    };
    fixup(page.root);
    return page;
}

browse::PageModel Site::render_page_locked(const std::string& path_with_query,
                                           const Session& session) {
    auto [path, query] = split_query(path_with_query);
    while (path.size() > 1 && path.back() == '/') path.pop_back();

    for (const auto& route : fixture_.page_routes) {
        std::map<std::string, std::string> params;
        if (!match_template(route.path_template, path, params)) continue;
        RouteParams p;
        p.path = std::move(params);
        p.query = query;
        p.session = session;
        return finish_page(path_with_query, route.renderer(state_, p));
    }

    browse::Element root = el("generic", fixture_.site_id);
    root.children.push_back(heading("404 Not Found"));
    root.children.push_back(text("No page at " + path));
    return finish_page(path_with_query, std::move(root));
}

browse::PageModel Site::render_page(const std::string& url_or_path, const Session& session) {
    std::lock_guard<std::mutex> lock(mutex_);
    return render_page_locked(strip_to_path(url_or_path), session);
}

browse::PageModel Site::submit_page(const std::string& url_or_path, const std::string& method,
                                    const json& fields, const Session& session) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string full_path = strip_to_path(url_or_path);
    auto [path, query] = split_query(full_path);

    for (const auto& route : fixture_.page_submits) {
        if (to_upper(method) != route.method) continue;
        std::map<std::string, std::string> params;
        if (!match_template(route.path_template, path, params)) continue;
        RouteParams p;
        p.path = std::move(params);
        p.query = query;
        p.body = fields;
        p.session = session;
        std::string next_path = route.handler(state_, p);
        return render_page_locked(next_path, session);
    }

    browse::Element root = el("generic", fixture_.site_id);
    root.children.push_back(heading("404 Not Found"));
    root.children.push_back(text("No form handler at " + path));
    return finish_page(full_path, std::move(root));
}

json Site::snapshot() {
    std::lock_guard<std::mutex> lock(mutex_);
    return state_.snapshot();
}

// ---- SitePageProvider --------------------------------------------------------

SitePageProvider::SitePageProvider(std::vector<std::shared_ptr<Site>> sites, Session session)
    : sites_(std::move(sites)), session_(std::move(session)) {}

Site& SitePageProvider::site_for(const std::string& url) {
    for (const auto& site : sites_) {
        if (url.rfind(site->base_url(), 0) == 0) return *site;
    }
    if (sites_.empty()) throw Error("no sites configured");
    return *sites_.front();
}

browse::PageModel SitePageProvider::render(const std::string& url) {
    return site_for(url).render_page(url, session_);
}

browse::PageModel SitePageProvider::submit(const std::string& url, const std::string& method,
                                           const json& fields) {
    return site_for(url).submit_page(url, method, fields, session_);
}

// ---- SiteServer ---------------------------------------------------------------

struct SiteServer::Impl {
    httplib::Server server;
};

SiteServer::SiteServer(std::shared_ptr<Site> site, std::string host, int port)
    : site_(std::move(site)), host_(std::move(host)), port_(port),
      impl_(std::make_unique<Impl>()) {}

SiteServer::~SiteServer() { stop(); }

void SiteServer::start() {
    httplib::Server& svr = impl_->server;

    auto handle = [this](const httplib::Request& req, httplib::Response& res) {
        if (req.path == "/__render" || req.path == "/__snapshot" || req.path == "/__submit") {
            if (req.path == "/__snapshot") {
                res.set_content(site_->snapshot().dump(1), "application/json");
                return;
            }
            Session session{req.get_param_value("user")};
            if (session.username.empty()) session.username = site_->fixture().username;
            if (req.path == "/__render") {
                std::string url = req.get_param_value("url");
                browse::PageModel page = site_->render_page(url, session);
                res.set_content(browse::page_to_json(page).dump(), "application/json");
                return;
            }
            json payload = json::parse(req.body, nullptr, false);
            if (payload.is_discarded()) {
                res.status = 400;
                res.set_content(R"({"error":"bad_request"})", "application/json");
                return;
            }
            browse::PageModel page =
                site_->submit_page(payload.value("url", "/"), payload.value("method", "POST"),
                                   payload.value("fields", json::object()), session);
            res.set_content(browse::page_to_json(page).dump(), "application/json");
            return;
        }

        ApiRequest request;
        request.method = req.method;
        request.path = req.path;
        for (const auto& [k, v] : req.params) request.query[k] = v;
        for (const auto& [k, v] : req.headers) request.headers[k] = v;
        request.body = req.body;
        ApiResponse response = site_->serve_api(request);
        res.status = response.status;
        res.set_content(response.body.dump(), "application/json");
    };

    const char* any = R"(/.*)";
    svr.Get(any, handle);
    svr.Post(any, handle);
    svr.Put(any, handle);
    svr.Patch(any, handle);
    svr.Delete(any, handle);

    if (!svr.bind_to_port(host_, port_)) {
        throw PortInUse("cannot bind " + host_ + ":" + std::to_string(port_));
    }
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void SiteServer::stop() {
    if (thread_.joinable()) {
        impl_->server.stop();
        thread_.join();
    }
}

} // namespace webagents::sim
