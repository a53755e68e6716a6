#include "webagents/catalog.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

#include "webagents/errors.hpp"
#include "webagents/util.hpp"

namespace webagents::catalog {

namespace {

const std::set<std::string>& known_methods() {
    static const std::set<std::string> methods = {"GET", "POST", "PUT", "DELETE", "PATCH"};
    return methods;
}

// {param} names appearing in a path template, in order of appearance.
std::vector<std::string> path_params(std::string_view path) {
    std::vector<std::string> names;
    std::size_t pos = 0;
    while ((pos = path.find('{', pos)) != std::string_view::npos) {
        std::size_t end = path.find('}', pos);
        if (end == std::string_view::npos) break;
        names.emplace_back(path.substr(pos + 1, end - pos - 1));
        pos = end + 1;
    }
    return names;
}

// Ensures every {param} in the template is present with location=path.
void complete_path_params(EndpointDoc& doc) {
    for (const auto& name : path_params(doc.id.path_template)) {
        bool present = std::any_of(doc.params.begin(), doc.params.end(), [&](const ParamDoc& p) {
            return p.location == ParamLocation::path && p.name == name;
        });
        if (!present) {
            doc.params.push_back({name, ParamLocation::path, true, ""});
        }
    }
}

ParamLocation parse_location(const std::string& text) {
    if (text == "path") return ParamLocation::path;
    if (text == "header") return ParamLocation::header;
    if (text == "body") return ParamLocation::body;
    return ParamLocation::query;
}

// Deterministic plain-text rendering of a YAML subtree, two-space indented.
void render_yaml(const YAML::Node& node, std::ostringstream& out, int indent) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (node.Type()) {
    case YAML::NodeType::Scalar:
        out << pad << node.Scalar() << "\n";
        break;
    case YAML::NodeType::Sequence:
        for (const auto& item : node) {
            if (item.IsScalar()) {
                out << pad << "- " << item.Scalar() << "\n";
            } else {
                out << pad << "-\n";
                render_yaml(item, out, indent + 1);
            }
        }
        break;
    case YAML::NodeType::Map:
        for (const auto& kv : node) {
            if (kv.second.IsScalar()) {
                out << pad << kv.first.Scalar() << ": " << kv.second.Scalar() << "\n";
            } else {
                out << pad << kv.first.Scalar() << ":\n";
                render_yaml(kv.second, out, indent + 1);
            }
        }
        break;
    default:
        break;
    }
}

std::string render_operation(const EndpointId& id, const YAML::Node& op,
                             const std::vector<ParamDoc>& params) {
    std::ostringstream out;
    out << id.canonical() << "\n\n";
    if (op["summary"]) out << "summary: " << op["summary"].as<std::string>() << "\n";
    if (op["description"]) out << "description: " << op["description"].as<std::string>() << "\n";
    if (!params.empty()) {
        out << "parameters:\n";
        for (const auto& p : params) {
            out << "  - " << p.name << " (" << to_string(p.location)
                << (p.required ? ", required" : "") << ")";
            if (!p.description.empty()) out << ": " << p.description;
            out << "\n";
        }
    }
    if (op["requestBody"]) {
        out << "requestBody:\n";
        render_yaml(op["requestBody"], out, 1);
    }
    if (op["responses"]) {
        out << "responses:\n";
        render_yaml(op["responses"], out, 1);
    }
    return out.str();
}

std::string operation_summary(const EndpointId& id, const YAML::Node& op) {
    if (op["summary"]) {
        std::string s = trim(op["summary"].as<std::string>());
        if (!s.empty()) return s;
    }
    if (op["description"]) {
        std::string s = first_sentence(op["description"].as<std::string>());
        if (!s.empty()) return s;
    }
    return id.canonical();
}

// Matches an endpoint heading; group 1 = verb, group 2 = path.
const std::regex& hash_heading_re() {
    static const std::regex re(R"(^#{1,6}\s*(GET|POST|PUT|DELETE|PATCH)\s+(/\S+))");
    return re;
}

const std::regex& bare_heading_re() {
    static const std::regex re(R"(^(GET|POST|PUT|DELETE|PATCH)\s+(/\S+)$)");
    return re;
}

bool match_endpoint_heading(const std::string& line, EndpointId& out) {
    std::smatch m;
    if (std::regex_search(line, m, hash_heading_re()) || std::regex_match(line, m, bare_heading_re())) {
        out.method = m[1].str();
        out.path_template = m[2].str();
        return true;
    }
    return false;
}

std::string readme_segment_summary(const std::vector<std::string>& lines, std::size_t begin,
                                   std::size_t end, const EndpointId& id) {
    std::ostringstream prose;
    for (std::size_t i = begin + 1; i < end; ++i) {
        const std::string& line = lines[i];
        std::string trimmed = trim(line);
        if (trimmed.empty()) {
            if (prose.tellp() > 0) break; // first paragraph only
            continue;
        }
        EndpointId ignore;
        if (match_endpoint_heading(line, ignore)) continue;
        if (prose.tellp() > 0) prose << " ";
        prose << trimmed;
    }
    std::string sentence = first_sentence(prose.str());
    if (sentence.empty()) sentence = id.canonical();
    return sentence;
}

constexpr const char* kDocGenPrompt =
    "You will be shown the implementation of a web service's API endpoints.\n"
    "Write README documentation for every endpoint you find.\n"
    "Rules:\n"
    "- Start each endpoint section with a markdown heading of the form\n"
    "  '## METHOD /path' (METHOD is one of GET, POST, PUT, DELETE, PATCH).\n"
    "- After the heading, describe what the endpoint does in one sentence,\n"
    "  then document input parameters, expected outputs, and one example call.\n"
    "- Document every endpoint exactly once.\n"
    "\n"
    "Service implementation:\n";

} // namespace

const char* to_string(ParamLocation loc) {
    switch (loc) {
    case ParamLocation::path: return "path";
    case ParamLocation::query: return "query";
    case ParamLocation::header: return "header";
    case ParamLocation::body: return "body";
    }
    return "query";
}

const char* to_string(QualityTier tier) {
    switch (tier) {
    case QualityTier::good: return "good";
    case QualityTier::fair: return "fair";
    case QualityTier::poor: return "poor";
    }
    return "fair";
}

const char* to_string(DocStrategy strategy) {
    return strategy == DocStrategy::one_stage ? "one_stage" : "two_stage";
}

EndpointId EndpointId::parse(std::string_view text) {
    std::string t = trim(text);
    std::size_t space = t.find_first_of(" \t");
    if (space == std::string::npos) {
        throw Error("endpoint id must be '<METHOD> <path>': '" + t + "'");
    }
    EndpointId id;
    id.method = to_upper(trim(t.substr(0, space)));
    id.path_template = trim(t.substr(space + 1));
    if (known_methods().count(id.method) == 0) {
        throw Error("unknown HTTP method in endpoint id: '" + t + "'");
    }
    if (id.path_template.empty() || id.path_template[0] != '/') {
        throw Error("endpoint path must begin with '/': '" + t + "'");
    }
    if (id.path_template.find_first_of(" \t") != std::string::npos) {
        throw Error("endpoint path must not contain whitespace: '" + t + "'");
    }
    return id;
}

ApiCatalog::ApiCatalog(std::string site_id, std::vector<EndpointDoc> docs, QualityTier tier)
    : site_id_(std::move(site_id)), tier_(tier), strategy_(DocStrategy::one_stage) {
    for (auto& doc : docs) {
        if (doc.summary.empty()) doc.summary = doc.id.canonical();
        doc.summary = single_line(doc.summary, 0);
        complete_path_params(doc);
        auto id = doc.id;
        if (!endpoints_.emplace(id, std::move(doc)).second) {
            throw DuplicateEndpoint("duplicate endpoint: " + id.canonical());
        }
    }
    strategy_ = endpoints_.size() < kTwoStageThreshold ? DocStrategy::one_stage
                                                       : DocStrategy::two_stage;
}

const EndpointDoc* ApiCatalog::find(const EndpointId& id) const {
    auto it = endpoints_.find(id);
    return it == endpoints_.end() ? nullptr : &it->second;
}

ApiCatalog parse_openapi(std::string_view yaml_text, std::string site_id, QualityTier tier) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml_text));
    } catch (const YAML::Exception& e) {
        throw MalformedDoc(std::string("not valid YAML: ") + e.what());
    }
    if (!root.IsMap() || !root["paths"] || !root["paths"].IsMap()) {
        throw MalformedDoc("OpenAPI document has no 'paths' mapping");
    }

    std::vector<EndpointDoc> docs;
    for (const auto& path_entry : root["paths"]) {
        std::string path = path_entry.first.as<std::string>();
        const YAML::Node& ops = path_entry.second;
        if (!ops.IsMap()) continue;
        for (const auto& op_entry : ops) {
            std::string method = to_upper(op_entry.first.as<std::string>());
            if (known_methods().count(method) == 0) continue; // outside the subset
            const YAML::Node& op = op_entry.second;

            EndpointDoc doc;
            doc.id = {method, path};
            doc.source_format = SourceFormat::openapi;
            if (op["parameters"] && op["parameters"].IsSequence()) {
                for (const auto& pn : op["parameters"]) {
                    ParamDoc p;
                    p.name = pn["name"] ? pn["name"].as<std::string>() : "";
                    p.location = pn["in"] ? parse_location(pn["in"].as<std::string>())
                                          : ParamLocation::query;
                    p.required = pn["required"] ? pn["required"].as<bool>() : false;
                    p.description = pn["description"] ? pn["description"].as<std::string>() : "";
                    doc.params.push_back(std::move(p));
                }
            }
            complete_path_params(doc);
            doc.summary = operation_summary(doc.id, op);
            doc.body = render_operation(doc.id, op, doc.params);
            docs.push_back(std::move(doc));
        }
    }
    return ApiCatalog(std::move(site_id), std::move(docs), tier);
}

ApiCatalog parse_readme(std::string_view markdown_text, std::string site_id, QualityTier tier) {
    std::vector<std::string> lines = split_lines(markdown_text);

    std::vector<std::pair<std::size_t, EndpointId>> headings;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        EndpointId id;
        if (match_endpoint_heading(lines[i], id)) {
            headings.emplace_back(i, id);
        }
    }
    if (headings.empty()) {
        throw MalformedDoc("no endpoint headings found in README");
    }

    std::vector<EndpointDoc> docs;
    for (std::size_t h = 0; h < headings.size(); ++h) {
        std::size_t begin = headings[h].first;
        std::size_t end = h + 1 < headings.size() ? headings[h + 1].first : lines.size();

        std::ostringstream body;
        for (std::size_t i = begin; i < end; ++i) {
            body << lines[i];
            if (i + 1 < end) body << "\n";
        }

        EndpointDoc doc;
        doc.id = headings[h].second;
        doc.source_format = SourceFormat::readme;
        doc.body = body.str();
        doc.summary = readme_segment_summary(lines, begin, end, doc.id);
        docs.push_back(std::move(doc));
    }
    return ApiCatalog(std::move(site_id), std::move(docs), tier);
}

std::vector<std::pair<EndpointId, std::string>> summarize_catalog(const ApiCatalog& cat) {
    std::vector<std::pair<EndpointId, std::string>> out;
    out.reserve(cat.size());
    for (const auto& [id, doc] : cat.endpoints()) {
        out.emplace_back(id, single_line(doc.summary, kSummaryMaxChars));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.first.canonical() < b.first.canonical();
    });
    return out;
}

namespace {

// Unknown-endpoint message with the 5 closest ids by edit distance over
// canonical renderings, ties broken lexicographically.
LookupResult unknown_endpoint_message(const ApiCatalog& cat, const std::string& query,
                                      const std::string& reason) {
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [eid, doc] : cat.endpoints()) {
        ranked.emplace_back(levenshtein(query, eid.canonical()), eid.canonical());
    }
    std::sort(ranked.begin(), ranked.end());

    std::ostringstream msg;
    msg << reason;
    if (!ranked.empty()) {
        msg << " Closest available endpoints:\n";
        for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) {
            msg << "  " << ranked[i].second << "\n";
        }
        msg << "Retry the documentation lookup with one of the ids above.";
    } else {
        msg << " The catalog is empty.";
    }
    return {false, msg.str()};
}

} // namespace

LookupResult get_api_documentation(const ApiCatalog& cat, const EndpointId& id) {
    if (const EndpointDoc* doc = cat.find(id)) {
        return {true, doc->body};
    }
    return unknown_endpoint_message(cat, id.canonical(),
                                    "Unknown endpoint '" + id.canonical() + "'.");
}

LookupResult get_api_documentation(const ApiCatalog& cat, std::string_view id_text) {
    EndpointId id;
    try {
        id = EndpointId::parse(id_text);
    } catch (const Error& e) {
        std::string query = trim(id_text);
        return unknown_endpoint_message(cat, query,
                                        "Malformed endpoint id '" + query + "': " + e.what() + ".");
    }
    return get_api_documentation(cat, id);
}

std::string generate_docs_from_source(std::string_view impl_text, agent::LlmBackend& backend) {
    if (trim(impl_text).empty()) {
        throw Error("generate_docs_from_source requires non-empty implementation text");
    }

    auto ask = [&](const std::string& extra) {
        std::vector<agent::ChatMessage> messages;
        messages.push_back({"user", kDocGenPrompt + std::string(impl_text) + extra});
        return backend.complete(messages).text;
    };

    std::string readme = ask("");
    try {
        parse_readme(readme, "generated");
        return readme;
    } catch (const Error& first_error) {
        std::string retry_note = std::string("\n\nYour previous README failed to parse: ") +
                                 first_error.what() + "\nRewrite it following the rules above.";
        readme = ask(retry_note);
        try {
            parse_readme(readme, "generated");
            return readme;
        } catch (const Error& second_error) {
            throw UngeneratableDoc(std::string("generated README failed to parse twice: ") +
                                   second_error.what());
        }
    }
}

} // namespace webagents::catalog
