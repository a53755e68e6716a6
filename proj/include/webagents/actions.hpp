#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "webagents/catalog.hpp"
#include "webagents/errors.hpp"
#include "webagents/exec_types.hpp"

namespace webagents::actions {

// ---- API programs -----------------------------------------------------

struct Paginate {
    std::string param_name = "page";
    std::optional<std::string> page_size_param;
    int max_pages = 50; // >= 1

    bool operator==(const Paginate&) const = default;
};

struct HttpCall {
    std::string method;
    std::string path; // may embed {name} references to earlier bindings
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;
    std::optional<nlohmann::json> body;
    std::map<std::string, std::string> extract; // binding name -> RFC 6901 pointer
    std::optional<Paginate> paginate;

    bool operator==(const HttpCall&) const = default;
};

struct ApiProgram {
    std::vector<HttpCall> calls; // executed strictly in order

    bool operator==(const ApiProgram&) const = default;
};

// ---- Browse programs ---------------------------------------------------

// A literal argument: string, number, or list of strings.
using ArgValue = std::variant<std::string, double, std::vector<std::string>>;

struct BrowseCommand {
    std::string name;
    std::vector<ArgValue> args;
    // click / dblclick keyword arguments
    std::string button = "left";
    std::vector<std::string> modifiers;

    const std::string& str_arg(std::size_t i) const;
    double num_arg(std::size_t i) const;
    std::vector<std::string> list_arg(std::size_t i) const; // single string -> 1-element list

    bool operator==(const BrowseCommand&) const = default;
};

struct BrowseProgram {
    std::vector<BrowseCommand> commands; // >= 1

    bool operator==(const BrowseProgram&) const = default;
};

// ---- The action union --------------------------------------------------

struct DocLookup {
    catalog::EndpointId id;
    bool operator==(const DocLookup&) const = default;
};
struct Finish {
    std::string answer;
    bool operator==(const Finish&) const = default;
};
struct Message {
    std::string text;
    bool operator==(const Message&) const = default;
};
struct Exit {
    bool operator==(const Exit&) const = default;
};

using Action = std::variant<ApiProgram, BrowseProgram, DocLookup, Finish, Message, Exit>;

// Errors a malformed turn feeds back to the model as its observation.
struct TurnError {
    enum class Kind { multiple_blocks, malformed_block };
    Kind kind;
    std::string message;
};

// Exactly one of action / error is set.
struct ParsedTurn {
    std::optional<Action> action;
    std::optional<TurnError> error;
};

// Total over all strings. Recognizes, in priority order: Finish[...] with a
// balanced-bracket answer, one <execute_api> block, one <execute_browse>
// block, an exit block (<exit></exit> or <finish></finish>), else Message.
ParsedTurn parse_turn(std::string_view raw);

// Browse-program grammar errors.
class UnknownCommand : public Error {
public:
    using Error::Error;
};
class ArityError : public Error {
public:
    using Error::Error;
};
class BadLiteral : public Error {
public:
    using Error::Error;
};

// One command per call expression; double-quoted strings with backslash
// escapes; keyword args (button, modifiers) for click/dblclick.
std::vector<BrowseCommand> parse_browse_program(std::string_view text);

// Canonical renderings; parse(render(x)) is structurally x.
std::string render_browse_command(const BrowseCommand& cmd);
std::string render_action(const Action& action);

nlohmann::json api_program_to_json(const ApiProgram& program);
ApiProgram api_program_from_json(const nlohmann::json& payload);

// Tagged record used in trajectory files: {"kind": "api_program" | ...}.
nlohmann::json action_to_json(const Action& action);

// Observation text for executed API calls: per call a status line plus the
// body truncated to byte_budget with a "[truncated N bytes]" marker, then a
// bindings section listing extracted values.
std::string render_api_result(const std::vector<exec::HttpResult>& results,
                              const nlohmann::json& bindings, std::size_t byte_budget);

} // namespace webagents::actions
