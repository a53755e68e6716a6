#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/browser.hpp"
#include "webagents/catalog.hpp"

namespace webagents::sim {

using nlohmann::json;

struct Session {
    std::string username;
};

struct ApiRequest {
    std::string method;
    std::string path; // without query string
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    json body;
};

// Live mutable copy of the seed plus an ordered mutation log.
class SiteState {
public:
    explicit SiteState(json seed); // {"data": ..., "mutations": [...]}

    json& data() { return state_["data"]; }
    const json& data() const { return state_["data"]; }

    void log_mutation(const std::string& op, const std::string& target, json detail,
                      const std::string& actor);
    std::size_t mutation_count() const { return state_["mutations"].size(); }

    // Canonical (key-sorted) JSON of the full live state; byte-stable for
    // equal states.
    json snapshot() const { return state_; }

private:
    json state_;
};

struct RouteParams {
    std::map<std::string, std::string> path;
    std::map<std::string, std::string> query;
    json body;
    Session session; // authenticated user, empty username when anonymous
};

using ApiHandler = std::function<ApiResponse(SiteState&, const RouteParams&)>;

struct RouteSpec {
    catalog::EndpointId id;
    bool requires_auth = false;
    ApiHandler handler;
};

using PageRenderer =
    std::function<browse::Element(const SiteState&, const RouteParams&)>;
// Page form handlers mutate state and return the path to re-render.
using PageSubmitHandler = std::function<std::string(SiteState&, const RouteParams&)>;

struct PageRoute {
    std::string path_template;
    PageRenderer renderer;
};

struct PageSubmitRoute {
    std::string method;
    std::string path_template;
    PageSubmitHandler handler;
};

struct SiteFixture {
    std::string site_id;
    catalog::QualityTier tier = catalog::QualityTier::fair;
    json seed;
    std::vector<RouteSpec> api_routes;
    std::vector<PageRoute> page_routes;
    std::vector<PageSubmitRoute> page_submits;
    std::string docs_text;
    std::string docs_format; // "openapi" | "readme"
    std::string username;    // session user pages are logged in as
    std::string access_token;
};

struct ExpansionPack {
    std::vector<RouteSpec> routes;
    std::string docs; // README sections appended to the shipped docs
};

SiteFixture make_gitforge(const std::string& data_dir);
SiteFixture make_forum(const std::string& data_dir, bool expanded = false);
SiteFixture make_shop(const std::string& data_dir);
SiteFixture make_site(const std::string& site_id, const std::string& data_dir,
                      bool expanded = false);

ExpansionPack forum_expansion(const std::string& data_dir);

// Returns the fixture with the pack's routes and docs added. Throws
// DuplicateEndpoint when an expansion id already exists.
SiteFixture apply_api_expansion(SiteFixture fixture, const ExpansionPack& pack);

catalog::ApiCatalog parse_fixture_docs(const SiteFixture& fixture);

// A live site: one fixture + one state, serving both interfaces under a
// single mutex.
class Site {
public:
    Site(SiteFixture fixture, std::string base_url);

    ApiResponse serve_api(const ApiRequest& request);
    browse::PageModel render_page(const std::string& url_or_path, const Session& session);
    browse::PageModel submit_page(const std::string& url_or_path, const std::string& method,
                                  const json& fields, const Session& session);
    json snapshot();

    const SiteFixture& fixture() const { return fixture_; }
    const std::string& base_url() const { return base_url_; }

private:
    browse::PageModel finish_page(const std::string& path, browse::Element root);
    browse::PageModel render_page_locked(const std::string& path, const Session& session);
    std::string strip_to_path(const std::string& url_or_path) const;

    SiteFixture fixture_;
    std::string base_url_;
    SiteState state_;
    std::mutex mutex_;
};

// In-process PageProvider over a set of sites, routing by base-url prefix.
class SitePageProvider final : public browse::PageProvider {
public:
    SitePageProvider(std::vector<std::shared_ptr<Site>> sites, Session session);
    browse::PageModel render(const std::string& url) override;
    browse::PageModel submit(const std::string& url, const std::string& method,
                             const json& fields) override;

private:
    Site& site_for(const std::string& url);
    std::vector<std::shared_ptr<Site>> sites_;
    Session session_;
};

// Serves a Site over loopback HTTP: the API routes plus the internal
// endpoints /__render, /__submit and /__snapshot.
class SiteServer {
public:
    SiteServer(std::shared_ptr<Site> site, std::string host, int port);
    ~SiteServer();

    void start(); // throws PortInUse when the port cannot be bound
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::shared_ptr<Site> site_;
    std::string host_;
    int port_;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

} // namespace webagents::sim
