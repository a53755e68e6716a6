#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "webagents/backend.hpp"

namespace webagents::catalog {

// One API operation: "<METHOD> <path_template>".
struct EndpointId {
    std::string method;        // uppercase HTTP verb
    std::string path_template; // begins with '/', may contain {param} segments

    std::string canonical() const { return method + " " + path_template; }

    // Accepts lowercase verbs and surplus whitespace; throws webagents::Error
    // when the text is not "<verb> </path>" shaped.
    static EndpointId parse(std::string_view text);

    auto operator<=>(const EndpointId&) const = default;
};

enum class ParamLocation { path, query, header, body };

const char* to_string(ParamLocation loc);

struct ParamDoc {
    std::string name;
    ParamLocation location = ParamLocation::query;
    bool required = false;
    std::string description;
};

enum class SourceFormat { readme, openapi, generated };

struct EndpointDoc {
    EndpointId id;
    std::string summary; // non-empty, single line
    std::string body;    // full documentation text
    std::vector<ParamDoc> params;
    SourceFormat source_format = SourceFormat::readme;
};

enum class QualityTier { good, fair, poor };
enum class DocStrategy { one_stage, two_stage };

const char* to_string(QualityTier tier);
const char* to_string(DocStrategy strategy);

// Catalogs with fewer endpoints than this inline full docs into the prompt;
// larger ones switch to summaries plus per-endpoint lookup.
inline constexpr std::size_t kTwoStageThreshold = 100;

// Summary lines are capped when building prompt text; longer ones are
// truncated with an ellipsis.
inline constexpr std::size_t kSummaryMaxChars = 120;

// Immutable after construction; safe to share across concurrent tasks.
class ApiCatalog {
public:
    ApiCatalog(std::string site_id, std::vector<EndpointDoc> docs, QualityTier tier);

    const std::string& site_id() const { return site_id_; }
    QualityTier tier() const { return tier_; }
    DocStrategy strategy() const { return strategy_; }
    std::size_t size() const { return endpoints_.size(); }
    const std::map<EndpointId, EndpointDoc>& endpoints() const { return endpoints_; }
    const EndpointDoc* find(const EndpointId& id) const;

private:
    std::string site_id_;
    QualityTier tier_;
    DocStrategy strategy_;
    std::map<EndpointId, EndpointDoc> endpoints_;
};

// OpenAPI 3.x subset: paths -> method -> {summary, description, parameters,
// requestBody, responses}. Throws MalformedDoc / DuplicateEndpoint.
ApiCatalog parse_openapi(std::string_view yaml_text, std::string site_id,
                         QualityTier tier = QualityTier::fair);

// README convention: each endpoint section starts at a heading line matching
//   ^#{1,6}\s*(GET|POST|PUT|DELETE|PATCH)\s+/\S+   or
//   ^(GET|POST|PUT|DELETE|PATCH)\s+/\S+$
// The segment (heading included) is the doc body, verbatim.
ApiCatalog parse_readme(std::string_view markdown_text, std::string site_id,
                        QualityTier tier = QualityTier::fair);

// (id, capped summary) pairs sorted by canonical id rendering.
std::vector<std::pair<EndpointId, std::string>> summarize_catalog(const ApiCatalog& cat);

struct LookupResult {
    bool found = false;
    std::string text; // doc body, or an unknown-endpoint message with suggestions
};

// Never throws on unknown ids: returns a message listing the closest ids by
// edit distance so the caller can retry.
LookupResult get_api_documentation(const ApiCatalog& cat, std::string_view id_text);
LookupResult get_api_documentation(const ApiCatalog& cat, const EndpointId& id);

// Asks the backend to write README documentation for a service implementation
// and validates the reply by re-parsing it. One retry with the parse error
// appended, then UngeneratableDoc.
std::string generate_docs_from_source(std::string_view impl_text, agent::LlmBackend& backend);

} // namespace webagents::catalog
