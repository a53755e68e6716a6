#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/actions.hpp"

namespace webagents::browse {

// One node of the accessibility tree. bids are assigned in document order at
// render time and are unique within a page.
struct Element {
    std::string bid;
    std::string role; // link,button,textbox,combobox,checkbox,text,heading,list,listitem,form,image,generic
    std::string name;
    std::optional<std::string> value;
    std::optional<std::vector<std::string>> options; // combobox
    std::optional<std::string> target;               // link
    std::optional<nlohmann::json> action;            // form-action descriptor (buttons)
    std::vector<Element> children;
};

struct PageModel {
    std::string url;
    Element root;
};

nlohmann::json page_to_json(const PageModel& page);
PageModel page_from_json(const nlohmann::json& j);

// Assigns "1".."N" in pre-order.
void assign_bids(PageModel& page);

const Element* find_by_bid(const Element& root, const std::string& bid);

// Where pages come from: the fixture sites implement this in-process; an
// HTTP-backed provider can sit behind the same interface.
class PageProvider {
public:
    virtual ~PageProvider() = default;
    virtual PageModel render(const std::string& url) = 0;
    virtual PageModel submit(const std::string& url, const std::string& method,
                             const nlohmann::json& fields) = 0;
};

struct Viewport {
    int offset = 0;  // >= 0, in rendered tree lines
    int height = 40; // > 0
};

// scroll() converts pixels to tree lines at 100px == 5 lines.
inline constexpr double kScrollPixelsPerLine = 20.0;

struct BrowserState {
    PageModel current;
    std::vector<std::string> back_stack;
    std::vector<std::string> forward_stack;
    Viewport viewport;
    std::map<std::string, std::string> pending_form; // bid -> entered value
    std::optional<std::string> focused_bid;
};

BrowserState initial_state(const std::string& start_url, PageProvider& pages, int viewport_height);

// Indented "[bid] role 'name' (attrs)" lines, viewport slice only, prefixed
// by the URL line and a "lines A-B of N" marker.
std::string observe(const BrowserState& state);

std::vector<std::string> render_tree_lines(const BrowserState& state);

struct ApplyResult {
    BrowserState state;
    std::string note; // warning / error text, empty when the command was clean
};

// Never throws for bad commands; problems come back as observation notes.
ApplyResult apply(const BrowserState& state, const actions::BrowseCommand& cmd,
                  PageProvider& pages);

} // namespace webagents::browse
