#pragma once

// Shared helpers for the fixture site builders. Internal to src/.

#include <string>
#include <vector>

#include "webagents/simsite.hpp"

namespace webagents::sim::detail {

inline constexpr std::size_t kPageSize = 20;

// ---- accessibility-tree element builders ----

browse::Element el(std::string role, std::string name);
browse::Element text(std::string body);
browse::Element heading(std::string body);
browse::Element link(std::string name, std::string target);
browse::Element button(std::string name, json action);
browse::Element textbox(std::string name, std::string value = "");
browse::Element combobox(std::string name, std::vector<std::string> options, std::string value);

// ---- generic JSON-collection routing ----

// One step down the state tree: data[array_field] is an array whose items
// are matched on id_field against the path parameter `param`.
struct Step {
    std::string array_field;
    std::string id_field;
    std::string param;
};

std::string id_text(const json& value);
json* find_item(json& array, const std::string& id_field, const std::string& value);
const json* find_item(const json& array, const std::string& id_field, const std::string& value);

// Walks steps from data; returns the final parent object, or null and sets
// `missing` to a 404 response.
json* resolve_parent(json& data, const std::vector<Step>& steps, const RouteParams& p,
                     ApiResponse* missing);

ApiResponse error_response(int status, const std::string& code, const std::string& message);
ApiResponse paginated(const json& items, const RouteParams& p);
int page_number(const RouteParams& p);

struct CrudSpec {
    std::string collection_tmpl; // e.g. /api/projects/{id}/issues
    std::vector<Step> steps;     // parent lookups
    std::string leaf;            // array field under the parent
    std::string item_param;      // path param of the item routes
    std::string id_field;        // field items are identified by
    std::string flags;           // subset of "LCGUD"
    json create_defaults = json::object(); // filled into created items when absent
};

void add_route(std::vector<RouteSpec>& routes, const std::string& method, const std::string& tmpl,
               bool requires_auth, ApiHandler handler);
void add_crud(std::vector<RouteSpec>& routes, const CrudSpec& spec);

std::string slurp_file(const std::string& path);
json load_seed(const std::string& path);

} // namespace webagents::sim::detail
