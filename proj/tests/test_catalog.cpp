#include <doctest.h>

#include <yaml-cpp/yaml.h>

#include <set>
#include <sstream>

#include "test_helpers.hpp"
#include "webagents/catalog.hpp"
#include "webagents/errors.hpp"

using namespace webagents;
using namespace webagents::catalog;

namespace {

// Independent oracle: walk the YAML document and count (path, method) pairs
// without going through the parser under test.
std::set<std::string> walk_openapi_ids(const std::string& yaml_text) {
    std::set<std::string> ids;
    YAML::Node root = YAML::Load(yaml_text);
    for (const auto& path_entry : root["paths"]) {
        for (const auto& op_entry : path_entry.second) {
            std::string method = op_entry.first.as<std::string>();
            for (const char* known : {"get", "post", "put", "delete", "patch"}) {
                if (method == known) {
                    std::string upper = method;
                    for (auto& c : upper) c = static_cast<char>(std::toupper(c));
                    ids.insert(upper + " " + path_entry.first.as<std::string>());
                }
            }
        }
    }
    return ids;
}

std::string synthetic_readme(std::size_t endpoints) {
    std::ostringstream out;
    out << "# Synthetic API\n\n";
    for (std::size_t i = 0; i < endpoints; ++i) {
        out << "## GET /api/things/" << i << "\n\nReturn thing " << i << ".\n\n";
    }
    return out.str();
}

} // namespace

TEST_CASE("gitforge OpenAPI fixture matches the independent walker") {
    std::string yaml_text = slurp(data_dir() + "/docs/gitforge_openapi.yaml");
    std::set<std::string> oracle = walk_openapi_ids(yaml_text);
    CHECK(oracle.size() == 112); // frozen from the authoring-time recount

    ApiCatalog cat = parse_openapi(yaml_text, "gitforge", QualityTier::good);
    CHECK(cat.size() == oracle.size());
    CHECK(cat.strategy() == DocStrategy::two_stage);

    std::set<std::string> parsed;
    for (const auto& [id, doc] : cat.endpoints()) parsed.insert(id.canonical());
    CHECK(parsed == oracle);
}

TEST_CASE("shop OpenAPI fixture parses and stays one-stage") {
    std::string yaml_text = slurp(data_dir() + "/docs/shop_openapi.yaml");
    ApiCatalog cat = parse_openapi(yaml_text, "shop");
    CHECK(cat.size() == walk_openapi_ids(yaml_text).size());
    CHECK(cat.size() == 36);
    CHECK(cat.strategy() == DocStrategy::one_stage);
}

TEST_CASE("single-endpoint OpenAPI keeps the summary verbatim") {
    const char* yaml_text = R"(
openapi: 3.0.3
paths:
  /api/{id}/commits:
    get:
      summary: List commits in a project
      parameters:
      - name: id
        in: path
        required: true
        description: The project id.
      responses:
        '200':
          description: commit objects
)";
    ApiCatalog cat = parse_openapi(yaml_text, "t");
    REQUIRE(cat.size() == 1);
    const EndpointDoc& doc = cat.endpoints().begin()->second;
    CHECK(doc.id.canonical() == "GET /api/{id}/commits");
    CHECK(doc.summary == "List commits in a project");
    CHECK(doc.source_format == SourceFormat::openapi);
}

TEST_CASE("empty paths mapping yields an empty one-stage catalog") {
    ApiCatalog cat = parse_openapi("openapi: 3.0.3\npaths: {}\n", "t");
    CHECK(cat.size() == 0);
    CHECK(cat.strategy() == DocStrategy::one_stage);
}

TEST_CASE("malformed OpenAPI inputs raise MalformedDoc") {
    CHECK_THROWS_AS(parse_openapi("::::not yaml:::\n  - {", "t"), MalformedDoc);
    CHECK_THROWS_AS(parse_openapi("openapi: 3.0.3\ninfo: {}\n", "t"), MalformedDoc);
}

TEST_CASE("missing path params are completed from the template") {
    const char* yaml_text = R"(
paths:
  /api/projects/{id}/issues/{iid}:
    get:
      summary: Return one issue.
)";
    ApiCatalog cat = parse_openapi(yaml_text, "t");
    const EndpointDoc& doc = cat.endpoints().begin()->second;
    std::set<std::string> path_params;
    for (const auto& p : doc.params) {
        if (p.location == ParamLocation::path) path_params.insert(p.name);
    }
    CHECK(path_params == std::set<std::string>{"id", "iid"});
}

TEST_CASE("forum README fixtures parse to 18 base and 31 expanded endpoints") {
    std::string base = slurp(data_dir() + "/docs/forum_base.md");
    std::string expansion = slurp(data_dir() + "/docs/forum_expansion.md");

    ApiCatalog base_cat = parse_readme(base, "forum", QualityTier::poor);
    CHECK(base_cat.size() == 18);
    CHECK(base_cat.strategy() == DocStrategy::one_stage);

    ApiCatalog expanded_cat = parse_readme(base + "\n" + expansion, "forum");
    CHECK(expanded_cat.size() == 31);
    CHECK(expanded_cat.strategy() == DocStrategy::one_stage);
}

TEST_CASE("README with a single heading yields that endpoint") {
    ApiCatalog cat = parse_readme("## GET /api/{id}/commits\n\nList commits in a project.\n", "t");
    REQUIRE(cat.size() == 1);
    CHECK(cat.endpoints().begin()->first.canonical() == "GET /api/{id}/commits");
    CHECK(cat.endpoints().begin()->second.summary == "List commits in a project.");
}

TEST_CASE("bare heading form requires the whole line") {
    ApiCatalog cat = parse_readme("GET /api/a\n\nFirst.\n\nGET /api/b trailing words\n", "t");
    // the second line has trailing text, so only the bare form on line 1 counts
    CHECK(cat.size() == 1);
}

TEST_CASE("duplicated README section raises DuplicateEndpoint") {
    std::string doubled = "## GET /api/a\n\nFirst.\n\n## GET /api/a\n\nAgain.\n";
    CHECK_THROWS_AS(parse_readme(doubled, "t"), DuplicateEndpoint);
}

TEST_CASE("README without endpoint headings raises MalformedDoc") {
    CHECK_THROWS_AS(parse_readme("# Title\n\nJust prose.\n", "t"), MalformedDoc);
}

TEST_CASE("README round-trip: every doc body re-parses to the same id") {
    std::string base = slurp(data_dir() + "/docs/forum_base.md");
    ApiCatalog cat = parse_readme(base, "forum");
    for (const auto& [id, doc] : cat.endpoints()) {
        ApiCatalog again = parse_readme(doc.body, "forum");
        REQUIRE(again.size() == 1);
        CHECK(again.endpoints().begin()->first == id);
    }
}

TEST_CASE("strategy boundary sits exactly at 100 endpoints") {
    CHECK(parse_readme(synthetic_readme(99), "t").strategy() == DocStrategy::one_stage);
    CHECK(parse_readme(synthetic_readme(100), "t").strategy() == DocStrategy::two_stage);
    CHECK(parse_readme(synthetic_readme(101), "t").strategy() == DocStrategy::two_stage);
}

TEST_CASE("parsing is deterministic") {
    std::string yaml_text = slurp(data_dir() + "/docs/shop_openapi.yaml");
    ApiCatalog a = parse_openapi(yaml_text, "shop");
    ApiCatalog b = parse_openapi(yaml_text, "shop");
    REQUIRE(a.size() == b.size());
    auto ia = a.endpoints().begin();
    auto ib = b.endpoints().begin();
    for (; ia != a.endpoints().end(); ++ia, ++ib) {
        CHECK(ia->first == ib->first);
        CHECK(ia->second.body == ib->second.body);
        CHECK(ia->second.summary == ib->second.summary);
    }
}

TEST_CASE("summarize_catalog sorts by canonical id and caps long summaries") {
    std::string long_summary(200, 'x');
    ApiCatalog cat("t",
                   {{EndpointId{"GET", "/b"}, "Short.", "body", {}, SourceFormat::readme},
                    {EndpointId{"GET", "/a"}, long_summary, "body", {}, SourceFormat::readme}},
                   QualityTier::fair);
    auto rows = summarize_catalog(cat);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].first.canonical() == "GET /a");
    CHECK(rows[1].first.canonical() == "GET /b");
    CHECK(rows[0].second.size() == kSummaryMaxChars);
    CHECK(rows[0].second.substr(kSummaryMaxChars - 3) == "...");

    ApiCatalog empty("t", {}, QualityTier::fair);
    CHECK(summarize_catalog(empty).empty());
}

TEST_CASE("summarize_catalog pairs each id with its one-line summary") {
    ApiCatalog cat = parse_readme("## GET /api/{id}/commits\n\nList commits in a project.\n", "t");
    auto rows = summarize_catalog(cat);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].first.canonical() == "GET /api/{id}/commits");
    CHECK(rows[0].second == "List commits in a project.");
}

TEST_CASE("get_api_documentation returns bodies, suggestions, and normalizes case") {
    std::string yaml_text = slurp(data_dir() + "/docs/gitforge_openapi.yaml");
    ApiCatalog cat = parse_openapi(yaml_text, "gitforge");

    LookupResult hit = get_api_documentation(cat, "GET /api/projects/{id}/commits");
    CHECK(hit.found);
    CHECK(hit.text.find("List commits in a project") != std::string::npos);
    CHECK(hit.text.find("author") != std::string::npos); // params are rendered

    LookupResult lower = get_api_documentation(cat, "get /api/projects/{id}/commits");
    CHECK(lower.found);
    CHECK(lower.text == hit.text);

    LookupResult miss = get_api_documentation(cat, "GET /nope");
    CHECK_FALSE(miss.found);
    CHECK(miss.text.find("Unknown endpoint") != std::string::npos);
    // five closest ids listed
    std::size_t lines = 0;
    for (char c : miss.text) lines += c == '\n' ? 1 : 0;
    CHECK(lines >= 5);

    LookupResult garbage = get_api_documentation(cat, "complete nonsense");
    CHECK_FALSE(garbage.found);
    CHECK(garbage.text.find("GET") != std::string::npos); // still suggests ids
}

TEST_CASE("get_api_documentation on an empty catalog explains itself") {
    ApiCatalog empty("t", {}, QualityTier::fair);
    LookupResult miss = get_api_documentation(empty, "GET /x");
    CHECK_FALSE(miss.found);
    CHECK(miss.text.find("empty") != std::string::npos);
}

TEST_CASE("endpoint id parsing round-trips its canonical rendering") {
    EndpointId id = EndpointId::parse("  get   /api/{id}/commits ");
    CHECK(id.method == "GET");
    CHECK(id.path_template == "/api/{id}/commits");
    CHECK(EndpointId::parse(id.canonical()) == id);

    CHECK_THROWS_AS(EndpointId::parse("FLY /api/x"), Error);
    CHECK_THROWS_AS(EndpointId::parse("GET api/x"), Error);
    CHECK_THROWS_AS(EndpointId::parse("GET"), Error);
}

TEST_CASE("generate_docs_from_source validates by re-parsing, with one retry") {
    std::string good = slurp(data_dir() + "/docs/forum_base.md") + "\n" +
                       slurp(data_dir() + "/docs/forum_expansion.md");
    std::string impl = slurp(data_dir() + "/docs/forum_impl.txt");
    REQUIRE_FALSE(impl.empty());

    SUBCASE("clean generation") {
        agent::ScriptedBackend backend({good});
        std::string readme = generate_docs_from_source(impl, backend);
        ApiCatalog cat = parse_readme(readme, "forum");
        CHECK(cat.size() == 31);
    }

    SUBCASE("first attempt unparseable, retry succeeds") {
        agent::ScriptedBackend backend({"sorry, here is some prose with no endpoints", good});
        std::string readme = generate_docs_from_source(impl, backend);
        CHECK(parse_readme(readme, "forum").size() == 31);
        CHECK(backend.turns_consumed() == 2);
        // the retry prompt carries the parse error back to the model
        const auto& retry_messages = backend.requests().back();
        CHECK(retry_messages.back().content.find("failed to parse") != std::string::npos);
    }

    SUBCASE("both attempts unparseable") {
        agent::ScriptedBackend backend({"prose", "more prose"});
        CHECK_THROWS_AS(generate_docs_from_source(impl, backend), UngeneratableDoc);
    }

    SUBCASE("empty implementation text is a precondition violation") {
        agent::ScriptedBackend backend({good});
        CHECK_THROWS_AS(generate_docs_from_source("  \n ", backend), Error);
    }
}
