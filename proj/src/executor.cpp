#include "webagents/executor.hpp"

#include <httplib.h>

#include <algorithm>
#include <set>

#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::exec {

using actions::HttpCall;
using nlohmann::json;

namespace {

// {name} references in a string, in order.
std::vector<std::string> references(std::string_view text) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        std::size_t end = text.find('}', pos);
        if (end == std::string_view::npos) break;
        names.emplace_back(text.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return names;
}

std::string binding_text(const json& value) {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
}

std::string substitute(std::string_view text, const json& bindings) {
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        std::size_t close = text.find('}', open);
        if (close == std::string_view::npos) {
            out.append(text.substr(pos));
            break;
        }
        out.append(text.substr(pos, open - pos));
        std::string name(text.substr(open + 1, close - open - 1));
        out.append(binding_text(bindings.at(name)));
        pos = close + 1;
    }
    return out;
}

void check_references(const actions::ApiProgram& program, const json& seed_bindings) {
    std::set<std::string> bound;
    for (const auto& [name, value] : seed_bindings.items()) bound.insert(name);
    for (const auto& call : program.calls) {
        std::vector<std::string> needed = references(call.path);
        for (const auto& [k, v] : call.query) {
            for (auto& n : references(v)) needed.push_back(n);
        }
        for (const auto& name : needed) {
            if (bound.count(name) == 0) {
                throw UnresolvedReference("program references '{" + name +
                                          "}' which is not bound at that point");
            }
        }
        for (const auto& [name, ptr] : call.extract) bound.insert(name);
    }
}

struct SplitUrl {
    std::string root; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& base_url, const std::string& path) {
    if (path.rfind("http://", 0) == 0 || path.rfind("https://", 0) == 0) {
        std::size_t host_end = path.find('/', path.find("://") + 3);
        if (host_end == std::string::npos) return {path, "/"};
        return {path.substr(0, host_end), path.substr(host_end)};
    }
    return {base_url, path.empty() || path[0] != '/' ? "/" + path : path};
}

struct Fetch {
    bool transport_ok = true;
    std::string transport_error;
    int status = 0;
    std::map<std::string, std::string> headers;
    json body;
};

Fetch fetch_once(const HttpCall& call, const ExecContext& ctx, const json& bindings,
                 const std::map<std::string, std::string>& extra_query) {
    std::string path = substitute(call.path, bindings);
    SplitUrl target = split_url(ctx.base_url, path);

    httplib::Params params;
    for (const auto& [k, v] : call.query) params.emplace(k, substitute(v, bindings));
    for (const auto& [k, v] : extra_query) {
        params.erase(k);
        params.emplace(k, v);
    }
    std::string path_q = params.empty() ? target.path
                                        : httplib::append_query_params(target.path, params);

    httplib::Headers headers;
    bool has_auth = false;
    for (const auto& [k, v] : call.headers) {
        headers.emplace(k, v);
        if (to_lower(k) == "authorization") has_auth = true;
    }
    if (!has_auth) {
        auto host_token = ctx.host_tokens.find(target.root);
        if (host_token != ctx.host_tokens.end()) {
            headers.emplace("Authorization", "Bearer " + host_token->second);
        } else if (ctx.access_token) {
            headers.emplace("Authorization", "Bearer " + *ctx.access_token);
        }
    }

    httplib::Client client(target.root);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(30, 0);

    httplib::Result res;
    std::string body = call.body ? call.body->dump() : "";
    if (call.method == "GET") {
        res = client.Get(path_q, headers);
    } else if (call.method == "POST") {
        res = client.Post(path_q, headers, body, "application/json");
    } else if (call.method == "PUT") {
        res = client.Put(path_q, headers, body, "application/json");
    } else if (call.method == "PATCH") {
        res = client.Patch(path_q, headers, body, "application/json");
    } else if (call.method == "DELETE") {
        res = client.Delete(path_q, headers);
    } else {
        return {false, "unsupported method " + call.method, 0, {}, json()};
    }

    if (!res) {
        return {false, httplib::to_string(res.error()) + " for " + call.method + " " + target.root +
                           target.path,
                0,
                {},
                json()};
    }

    Fetch out;
    out.status = res->status;
    for (const auto& [k, v] : res->headers) out.headers[k] = v;
    json parsed = json::parse(res->body, nullptr, false);
    out.body = parsed.is_discarded() ? json(res->body) : parsed;
    return out;
}

const json* page_items(const json& body) {
    if (body.is_array()) return &body;
    if (body.is_object() && body.contains("items") && body["items"].is_array()) {
        return &body["items"];
    }
    return nullptr;
}

void apply_extractions(const HttpCall& call, const HttpResult& result, json& bindings) {
    for (const auto& [name, ptr] : call.extract) {
        try {
            bindings[name] = result.body.at(json::json_pointer(ptr));
        } catch (const json::exception& e) {
            bindings[name] = json{{"value", nullptr},
                                  {"reason", std::string("extraction failed at '") + ptr +
                                                 "': " + e.what()}};
        }
    }
}

} // namespace

ExecContext make_context(std::string base_url, std::optional<std::string> access_token,
                         std::size_t byte_budget) {
    ExecContext ctx;
    ctx.base_url = normalize_url(base_url);
    ctx.access_token = std::move(access_token);
    ctx.byte_budget = byte_budget;
    return ctx;
}

HttpResult paginate(const actions::HttpCall& call, ExecContext& ctx) {
    const actions::Paginate& pg = call.paginate.value();
    HttpResult merged;
    json merged_items = json::array();
    json first_body;
    std::string prev_dump;
    std::size_t first_page_count = 0;

    for (int page = 1; page <= pg.max_pages; ++page) {
        std::map<std::string, std::string> extra;
        extra[pg.param_name] = std::to_string(page);
        if (pg.page_size_param) extra[*pg.page_size_param] = "20";

        Fetch fetch = fetch_once(call, ctx, ctx.bindings, extra);
        if (!fetch.transport_ok) {
            throw TransportError(fetch.transport_error);
        }
        if (page == 1) {
            merged.status = fetch.status;
            merged.headers = fetch.headers;
            first_body = fetch.body;
        }
        merged.pages_fetched = page;

        if (fetch.status < 200 || fetch.status >= 300) {
            if (page == 1) {
                merged.body = fetch.body;
                return merged;
            }
            merged.note = "pagination stopped: page " + std::to_string(page) + " returned HTTP " +
                          std::to_string(fetch.status);
            break;
        }

        const json* items = page_items(fetch.body);
        if (items == nullptr) {
            merged.body = fetch.body;
            merged.note = "NotPaginatable: response is neither an array nor an object with an "
                          "'items' array; returning the first page only";
            return merged;
        }

        std::string dump = fetch.body.dump();
        if (page > 1 && dump == prev_dump) {
            merged.note = "pagination stopped: page " + std::to_string(page) +
                          " repeated the previous page";
            break;
        }
        prev_dump = dump;

        if (items->empty()) {
            if (page == 1) first_page_count = 0;
            break;
        }
        for (const auto& item : *items) merged_items.push_back(item);
        if (page == 1) {
            first_page_count = items->size();
        } else if (items->size() < first_page_count) {
            break; // short page: nothing left
        }
    }

    if (first_body.is_array() || first_body.is_null()) {
        merged.body = merged_items;
    } else {
        merged.body = first_body;
        merged.body["items"] = merged_items;
        if (merged.body.contains("page")) merged.body.erase("page");
    }
    return merged;
}

std::pair<std::vector<HttpResult>, nlohmann::json> execute_program(const actions::ApiProgram& program,
                                                                   ExecContext& ctx) {
    check_references(program, ctx.bindings);

    std::vector<HttpResult> results;
    for (const auto& call : program.calls) {
        if (call.paginate) {
            try {
                HttpResult merged = paginate(call, ctx);
                apply_extractions(call, merged, ctx.bindings);
                results.push_back(std::move(merged));
            } catch (const TransportError& e) {
                HttpResult failed;
                failed.status = 0;
                failed.note = std::string("TransportError: ") + e.what();
                failed.body = json();
                results.push_back(std::move(failed));
                break;
            }
            continue;
        }

        Fetch fetch = fetch_once(call, ctx, ctx.bindings, {});
        if (!fetch.transport_ok) {
            HttpResult failed;
            failed.status = 0;
            failed.note = "TransportError: " + fetch.transport_error;
            failed.body = json();
            results.push_back(std::move(failed));
            break;
        }
        HttpResult result;
        result.status = fetch.status;
        result.headers = std::move(fetch.headers);
        result.body = std::move(fetch.body);
        apply_extractions(call, result, ctx.bindings);
        results.push_back(std::move(result));
    }
    return {results, ctx.bindings};
}

} // namespace webagents::exec
