#include "webagents/browser.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "webagents/util.hpp"

namespace webagents::browse {

using nlohmann::json;

namespace {

void element_to_json(const Element& e, json& j) {
    j = json::object();
    j["bid"] = e.bid;
    j["role"] = e.role;
    j["name"] = e.name;
    if (e.value) j["value"] = *e.value;
    if (e.options) j["options"] = *e.options;
    if (e.target) j["target"] = *e.target;
    if (e.action) j["action"] = *e.action;
    if (!e.children.empty()) {
        j["children"] = json::array();
        for (const auto& child : e.children) {
            json cj;
            element_to_json(child, cj);
            j["children"].push_back(std::move(cj));
        }
    }
}

Element element_from_json(const json& j) {
    Element e;
    e.bid = j.value("bid", "");
    e.role = j.value("role", "generic");
    e.name = j.value("name", "");
    if (j.contains("value")) e.value = j["value"].get<std::string>();
    if (j.contains("options")) e.options = j["options"].get<std::vector<std::string>>();
    if (j.contains("target")) e.target = j["target"].get<std::string>();
    if (j.contains("action")) e.action = j["action"];
    if (j.contains("children")) {
        for (const auto& cj : j["children"]) e.children.push_back(element_from_json(cj));
    }
    return e;
}

void assign_bids_walk(Element& e, int& next) {
    e.bid = std::to_string(next++);
    for (auto& child : e.children) assign_bids_walk(child, next);
}

void render_walk(const Element& e, int depth, const BrowserState& state,
                 std::vector<std::string>& lines) {
    std::ostringstream line;
    line << std::string(static_cast<std::size_t>(depth) * 2, ' ');
    line << "[" << e.bid << "] " << e.role << " '" << e.name << "'";

    std::vector<std::string> attrs;
    auto pending = state.pending_form.find(e.bid);
    if (e.role == "textbox") {
        std::string value = pending != state.pending_form.end() ? pending->second
                                                                : e.value.value_or("");
        attrs.push_back("value='" + value + "'");
    } else if (e.role == "combobox") {
        std::string value = pending != state.pending_form.end() ? pending->second
                                                                : e.value.value_or("");
        attrs.push_back("value='" + value + "'");
        if (e.options) {
            std::string opts;
            for (std::size_t i = 0; i < e.options->size(); ++i) {
                if (i) opts += "|";
                opts += (*e.options)[i];
            }
            attrs.push_back("options=[" + opts + "]");
        }
    } else if (e.role == "checkbox") {
        std::string value = pending != state.pending_form.end() ? pending->second
                                                                : e.value.value_or("false");
        attrs.push_back(value == "true" ? "checked" : "unchecked");
    } else if (e.role == "link" && e.target) {
        attrs.push_back("-> " + *e.target);
    }
    if (state.focused_bid && *state.focused_bid == e.bid) {
        attrs.push_back("focused");
    }

    if (!attrs.empty()) {
        line << " (";
        for (std::size_t i = 0; i < attrs.size(); ++i) {
            if (i) line << ", ";
            line << attrs[i];
        }
        line << ")";
    }
    lines.push_back(line.str());
    for (const auto& child : e.children) render_walk(child, depth + 1, state, lines);
}

int clamp_offset(int offset, int total, int height) {
    int max_offset = std::max(0, total - height);
    return std::clamp(offset, 0, max_offset);
}

// Root-relative targets resolve against the current page's scheme://host.
std::string resolve_url(const std::string& current_url, const std::string& target) {
    if (target.rfind("http://", 0) == 0 || target.rfind("https://", 0) == 0) {
        return target;
    }
    std::size_t scheme = current_url.find("://");
    std::string root = current_url;
    if (scheme != std::string::npos) {
        std::size_t host_end = current_url.find('/', scheme + 3);
        if (host_end != std::string::npos) root = current_url.substr(0, host_end);
    }
    if (!target.empty() && target[0] == '/') return root + target;
    return root + "/" + target;
}

BrowserState load_page(BrowserState state, PageModel page) {
    state.current = std::move(page);
    state.viewport.offset = 0;
    state.pending_form.clear();
    state.focused_bid.reset();
    return state;
}

} // namespace

json page_to_json(const PageModel& page) {
    json j;
    j["url"] = page.url;
    element_to_json(page.root, j["root"]);
    return j;
}

PageModel page_from_json(const json& j) {
    PageModel page;
    page.url = j.value("url", "");
    page.root = element_from_json(j.at("root"));
    return page;
}

void assign_bids(PageModel& page) {
    int next = 1;
    assign_bids_walk(page.root, next);
}

const Element* find_by_bid(const Element& root, const std::string& bid) {
    if (root.bid == bid) return &root;
    for (const auto& child : root.children) {
        if (const Element* hit = find_by_bid(child, bid)) return hit;
    }
    return nullptr;
}

BrowserState initial_state(const std::string& start_url, PageProvider& pages,
                           int viewport_height) {
    BrowserState state;
    state.viewport.height = viewport_height;
    state.current = pages.render(start_url);
    return state;
}

std::vector<std::string> render_tree_lines(const BrowserState& state) {
    std::vector<std::string> lines;
    render_walk(state.current.root, 0, state, lines);
    return lines;
}

std::string observe(const BrowserState& state) {
    std::vector<std::string> lines = render_tree_lines(state);
    int total = static_cast<int>(lines.size());
    int offset = clamp_offset(state.viewport.offset, total, state.viewport.height);
    int first = total == 0 ? 0 : offset + 1;
    int last = std::min(offset + state.viewport.height, total);

    std::ostringstream out;
    out << "URL: " << state.current.url << "\n";
    out << "lines " << first << "-" << last << " of " << total << "\n";
    for (int i = offset; i < last; ++i) {
        out << lines[static_cast<std::size_t>(i)] << "\n";
    }
    return out.str();
}

ApplyResult apply(const BrowserState& state, const actions::BrowseCommand& cmd,
                  PageProvider& pages) {
    BrowserState next = state;
    const std::string& name = cmd.name;

    if (name == "goto") {
        std::string url = resolve_url(state.current.url, cmd.str_arg(0));
        next.back_stack.push_back(state.current.url);
        next.forward_stack.clear();
        return {load_page(std::move(next), pages.render(url)), ""};
    }

    if (name == "go_back") {
        if (next.back_stack.empty()) {
            return {next, "NoHistory: there is no previous page to go back to."};
        }
        std::string url = next.back_stack.back();
        next.back_stack.pop_back();
        next.forward_stack.push_back(state.current.url);
        return {load_page(std::move(next), pages.render(url)), ""};
    }

    if (name == "go_forward") {
        if (next.forward_stack.empty()) {
            return {next, "NoHistory: there is no next page to go forward to."};
        }
        std::string url = next.forward_stack.back();
        next.forward_stack.pop_back();
        next.back_stack.push_back(state.current.url);
        return {load_page(std::move(next), pages.render(url)), ""};
    }

    if (name == "scroll") {
        double dy = cmd.num_arg(1);
        int delta_lines = static_cast<int>(std::lround(dy / kScrollPixelsPerLine));
        int total = static_cast<int>(render_tree_lines(state).size());
        next.viewport.offset =
            clamp_offset(state.viewport.offset + delta_lines, total, state.viewport.height);
        return {next, ""};
    }

    if (name == "drag_and_drop" || name == "upload_file") {
        return {next, "UnsupportedInSimulator: " + name + " has no effect on fixture pages."};
    }

    // Everything below addresses an element by bid.
    const std::string& bid = cmd.str_arg(0);
    const Element* el = find_by_bid(state.current.root, bid);
    if (el == nullptr) {
        return {next, "UnknownBid: no element with bid '" + bid + "' on this page."};
    }

    if (name == "fill") {
        if (el->role != "textbox") {
            return {next, "fill: element [" + bid + "] is a " + el->role + ", not a textbox."};
        }
        next.pending_form[bid] = cmd.str_arg(1);
        next.focused_bid = bid;
        return {next, ""};
    }

    if (name == "clear") {
        if (el->role != "textbox") {
            return {next, "clear: element [" + bid + "] is a " + el->role + ", not a textbox."};
        }
        next.pending_form[bid] = "";
        return {next, ""};
    }

    if (name == "select_option") {
        if (el->role != "combobox" || !el->options) {
            return {next, "select_option: element [" + bid + "] is not a combobox."};
        }
        std::vector<std::string> wanted = cmd.list_arg(1);
        for (const auto& opt : wanted) {
            if (std::find(el->options->begin(), el->options->end(), opt) == el->options->end()) {
                std::string opts;
                for (std::size_t i = 0; i < el->options->size(); ++i) {
                    if (i) opts += ", ";
                    opts += (*el->options)[i];
                }
                return {next, "InvalidOption: '" + opt + "' is not one of {" + opts + "}."};
            }
        }
        std::string joined;
        for (std::size_t i = 0; i < wanted.size(); ++i) {
            if (i) joined += ",";
            joined += wanted[i];
        }
        next.pending_form[bid] = joined;
        return {next, ""};
    }

    if (name == "focus" || name == "hover") {
        next.focused_bid = bid;
        return {next, ""};
    }

    if (name == "press") {
        const std::string& key = cmd.str_arg(1);
        next.focused_bid = bid;
        if (key == "Backspace") {
            std::string value = next.pending_form.count(bid) ? next.pending_form[bid]
                                                             : el->value.value_or("");
            if (!value.empty()) value.pop_back();
            next.pending_form[bid] = value;
            return {next, ""};
        }
        return {next, "press: key '" + key + "' has no effect in the simulator."};
    }

    if (name == "click" || name == "dblclick") {
        if (el->role == "link") {
            std::string url = resolve_url(state.current.url, el->target.value_or("/"));
            next.back_stack.push_back(state.current.url);
            next.forward_stack.clear();
            return {load_page(std::move(next), pages.render(url)), ""};
        }
        if (el->role == "button" && el->action) {
            const json& action = *el->action;
            json fields = action.value("data", json::object());
            if (action.contains("fields")) {
                for (const auto& [field_bid, field_name] : action["fields"].items()) {
                    auto pending = state.pending_form.find(field_bid);
                    if (pending != state.pending_form.end()) {
                        fields[field_name.get<std::string>()] = pending->second;
                    } else if (const Element* input = find_by_bid(state.current.root, field_bid)) {
                        fields[field_name.get<std::string>()] = input->value.value_or("");
                    }
                }
            }
            std::string url = resolve_url(state.current.url, action.value("path", "/"));
            std::string method = action.value("method", "POST");
            next.back_stack.push_back(state.current.url);
            next.forward_stack.clear();
            return {load_page(std::move(next), pages.submit(url, method, fields)), ""};
        }
        if (el->role == "checkbox") {
            std::string value = next.pending_form.count(bid) ? next.pending_form[bid]
                                                             : el->value.value_or("false");
            next.pending_form[bid] = value == "true" ? "false" : "true";
            return {next, ""};
        }
        if (el->role == "textbox" || el->role == "combobox" || el->role == "button") {
            next.focused_bid = bid;
            return {next, ""};
        }
        return {next, "click: element [" + bid + "] ('" + el->role + "') is not interactive."};
    }

    return {next, "UnsupportedInSimulator: " + name + " is not implemented."};
}

} // namespace webagents::browse
