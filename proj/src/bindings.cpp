#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "webagents/actions.hpp"
#include "webagents/agent.hpp"
#include "webagents/catalog.hpp"
#include "webagents/eval.hpp"
#include "webagents/harness.hpp"
#include "webagents/simsite.hpp"

namespace py = pybind11;
using namespace webagents;
using nlohmann::json;

namespace {

py::object to_py(const json& j) {
    py::object loads = py::module_::import("json").attr("loads");
    return loads(j.dump());
}

json from_py(const py::object& obj) {
    py::object dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(obj).cast<std::string>());
}

class PyCatalog {
public:
    explicit PyCatalog(catalog::ApiCatalog cat) : cat_(std::move(cat)) {}

    std::size_t size() const { return cat_.size(); }
    std::string strategy() const { return catalog::to_string(cat_.strategy()); }
    std::string site_id() const { return cat_.site_id(); }

    std::vector<std::pair<std::string, std::string>> summaries() const {
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto& [id, summary] : catalog::summarize_catalog(cat_)) {
            rows.emplace_back(id.canonical(), summary);
        }
        return rows;
    }

    py::tuple documentation(const std::string& endpoint_id) const {
        catalog::LookupResult result = catalog::get_api_documentation(cat_, endpoint_id);
        return py::make_tuple(result.found, result.text);
    }

private:
    catalog::ApiCatalog cat_;
};

PyCatalog py_parse_openapi(const std::string& yaml_text, const std::string& site_id) {
    return PyCatalog(catalog::parse_openapi(yaml_text, site_id));
}

PyCatalog py_parse_readme(const std::string& markdown_text, const std::string& site_id) {
    return PyCatalog(catalog::parse_readme(markdown_text, site_id));
}

py::object py_parse_turn(const std::string& raw) {
    actions::ParsedTurn parsed = actions::parse_turn(raw);
    if (parsed.error) {
        json err{{"kind", "error"},
                 {"error_kind", parsed.error->kind == actions::TurnError::Kind::multiple_blocks
                                    ? "multiple_blocks"
                                    : "malformed_block"},
                 {"message", parsed.error->message}};
        return to_py(err);
    }
    return to_py(actions::action_to_json(*parsed.action));
}

py::object py_evaluate(const std::string& trajectory_jsonl, const py::object& task) {
    agent::Trajectory traj = agent::trajectory_from_jsonl(trajectory_jsonl);
    eval::TaskSpec spec = eval::task_from_json(from_py(task));
    std::optional<std::string> url;
    if (!traj.final_url.empty()) url = traj.final_url;
    eval::EvalResult result = eval::evaluate(traj, spec, traj.final_snapshot, url);
    return to_py(eval::eval_result_to_json(result));
}

py::object py_run_manifest(const std::string& manifest_path, const std::string& variant,
                           const std::string& out_dir) {
    cli::RunManifest manifest = cli::load_manifest(manifest_path, cli::default_data_dir());
    if (!variant.empty()) manifest.variants = {variant};
    if (!out_dir.empty()) manifest.out_dir = out_dir;
    cli::RunOutcome outcome = cli::run_manifest(manifest);
    return to_py(outcome.report);
}

py::object py_render_page(const std::string& site_id, const std::string& path,
                          const std::string& data_dir_arg) {
    std::string dir = data_dir_arg.empty() ? cli::default_data_dir() : data_dir_arg;
    sim::SiteFixture fixture = sim::make_site(site_id, dir);
    std::string username = fixture.username;
    sim::Site site(std::move(fixture), "http://" + site_id + ".local");
    return to_py(browse::page_to_json(site.render_page(path, sim::Session{username})));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "webagents core: catalogs, action parsing, evaluation, and run orchestration";

    py::register_exception<Error>(m, "WebagentsError");

    py::class_<PyCatalog>(m, "ApiCatalog")
        .def_property_readonly("size", &PyCatalog::size)
        .def_property_readonly("strategy", &PyCatalog::strategy)
        .def_property_readonly("site_id", &PyCatalog::site_id)
        .def("summaries", &PyCatalog::summaries,
             "Sorted (endpoint id, one-line summary) pairs.")
        .def("documentation", &PyCatalog::documentation, py::arg("endpoint_id"),
             "Returns (found, text): the doc body, or a message with close ids.");

    m.def("parse_openapi", &py_parse_openapi, py::arg("yaml_text"), py::arg("site_id"),
          "Parse an OpenAPI 3.x YAML subset into an endpoint catalog.");
    m.def("parse_readme", &py_parse_readme, py::arg("markdown_text"), py::arg("site_id"),
          "Parse README-convention API docs into an endpoint catalog.");
    m.def("parse_turn", &py_parse_turn, py::arg("raw"),
          "Parse a raw model turn into its action record (or a feedback error).");
    m.def("evaluate_trajectory", &py_evaluate, py::arg("trajectory_jsonl"), py::arg("task"),
          "Re-evaluate a stored trajectory against a task spec dict.");
    m.def("run_manifest", &py_run_manifest, py::arg("manifest_path"), py::arg("variant") = "",
          py::arg("out_dir") = "", "Run a manifest and return the aggregate report.");
    m.def("render_page", &py_render_page, py::arg("site_id"), py::arg("path"),
          py::arg("data_dir") = "", "Render a fixture page to its accessibility-tree JSON.");
    m.def("data_dir", &cli::default_data_dir, "The resolved fixture data directory.");
}
