#include "webagents/actions.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "webagents/util.hpp"

namespace webagents::actions {

using nlohmann::json;

namespace {

// ---- browse-program tokenizer -------------------------------------------

struct Token {
    enum class Kind { ident, string, number, lparen, rparen, lbracket, rbracket, comma, equals, end };
    Kind kind = Kind::end;
    std::string text;
    double number = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_ws();
        if (pos_ >= src_.size()) return {Token::Kind::end, "", 0.0};
        char c = src_[pos_];
        switch (c) {
        case '(': ++pos_; return {Token::Kind::lparen, "(", 0.0};
        case ')': ++pos_; return {Token::Kind::rparen, ")", 0.0};
        case '[': ++pos_; return {Token::Kind::lbracket, "[", 0.0};
        case ']': ++pos_; return {Token::Kind::rbracket, "]", 0.0};
        case ',': ++pos_; return {Token::Kind::comma, ",", 0.0};
        case '=': ++pos_; return {Token::Kind::equals, "=", 0.0};
        case '"': return lex_string();
        default: break;
        }
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) return lex_number();
        if (c == '_' || std::isalpha(static_cast<unsigned char>(c))) return lex_ident();
        throw BadLiteral(std::string("unexpected character '") + c + "' in browse program");
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    Token lex_string() {
        ++pos_; // opening quote
        std::string out;
        while (pos_ < src_.size()) {
            char c = src_[pos_++];
            if (c == '"') return {Token::Kind::string, out, 0.0};
            if (c == '\\' && pos_ < src_.size()) {
                char esc = src_[pos_++];
                switch (esc) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default:
                    out.push_back('\\');
                    out.push_back(esc);
                    break;
                }
            } else {
                out.push_back(c);
            }
        }
        throw BadLiteral("unterminated string literal");
    }

    Token lex_number() {
        std::size_t start = pos_;
        if (src_[pos_] == '-') ++pos_;
        bool saw_digit = false;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            if (src_[pos_] != '.') saw_digit = true;
            ++pos_;
        }
        std::string text(src_.substr(start, pos_ - start));
        if (!saw_digit) throw BadLiteral("malformed number literal '" + text + "'");
        try {
            return {Token::Kind::number, text, std::stod(text)};
        } catch (const std::exception&) {
            throw BadLiteral("malformed number literal '" + text + "'");
        }
    }

    Token lex_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (src_[pos_] == '_' || std::isalnum(static_cast<unsigned char>(src_[pos_])))) {
            ++pos_;
        }
        return {Token::Kind::ident, std::string(src_.substr(start, pos_ - start)), 0.0};
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

// Signatures of the 14 browse commands. Shape chars: s = string, n = number,
// o = string or list of strings. Only click/dblclick accept keyword args.
struct Signature {
    const char* shape;
    bool kwargs = false;
};

const std::map<std::string, Signature>& signatures() {
    static const std::map<std::string, Signature> table = {
        {"goto", {"s"}},          {"go_back", {""}},
        {"go_forward", {""}},     {"scroll", {"nn"}},
        {"fill", {"ss"}},         {"select_option", {"so"}},
        {"focus", {"s"}},         {"click", {"s", true}},
        {"dblclick", {"s", true}},{"hover", {"s"}},
        {"press", {"ss"}},        {"clear", {"s"}},
        {"drag_and_drop", {"ss"}},{"upload_file", {"so"}},
    };
    return table;
}

bool arg_matches(const ArgValue& value, char shape) {
    switch (shape) {
    case 's': return std::holds_alternative<std::string>(value);
    case 'n': return std::holds_alternative<double>(value);
    case 'o':
        return std::holds_alternative<std::string>(value) ||
               std::holds_alternative<std::vector<std::string>>(value);
    default: return false;
    }
}

const std::array<std::string, 3>& valid_buttons() {
    static const std::array<std::string, 3> buttons = {"left", "middle", "right"};
    return buttons;
}

const std::array<std::string, 4>& valid_modifiers() {
    static const std::array<std::string, 4> mods = {"Alt", "Control", "Meta", "Shift"};
    return mods;
}

void validate_command(const BrowseCommand& cmd) {
    auto it = signatures().find(cmd.name);
    if (it == signatures().end()) {
        throw UnknownCommand("unknown browse command '" + cmd.name + "'");
    }
    const Signature& sig = it->second;
    std::string shape = sig.shape;
    if (cmd.args.size() != shape.size()) {
        throw ArityError(cmd.name + " expects " + std::to_string(shape.size()) +
                         " argument(s), got " + std::to_string(cmd.args.size()));
    }
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (!arg_matches(cmd.args[i], shape[i])) {
            throw ArityError(cmd.name + ": argument " + std::to_string(i + 1) +
                             " has the wrong kind");
        }
    }
    if (std::find(valid_buttons().begin(), valid_buttons().end(), cmd.button) ==
        valid_buttons().end()) {
        throw ArityError(cmd.name + ": invalid button '" + cmd.button + "'");
    }
    for (const auto& mod : cmd.modifiers) {
        if (std::find(valid_modifiers().begin(), valid_modifiers().end(), mod) ==
            valid_modifiers().end()) {
            throw ArityError(cmd.name + ": invalid modifier '" + mod + "'");
        }
    }
}

std::string escape_string(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out.push_back(c); break;
        }
    }
    out.push_back('"');
    return out;
}

std::string format_number(double value) {
    if (std::isfinite(value) && value == std::floor(value) && std::abs(value) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", value);
        return buf;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", value);
    return buf;
}

// ---- turn block scanning -------------------------------------------------

struct Block {
    std::string payload;
    bool terminated = true;
};

std::vector<Block> extract_blocks(std::string_view raw, std::string_view tag) {
    std::string open = "<" + std::string(tag) + ">";
    std::string close = "</" + std::string(tag) + ">";
    std::vector<Block> blocks;
    std::size_t pos = 0;
    while ((pos = raw.find(open, pos)) != std::string_view::npos) {
        std::size_t start = pos + open.size();
        std::size_t end = raw.find(close, start);
        if (end == std::string_view::npos) {
            blocks.push_back({std::string(raw.substr(start)), false});
            break;
        }
        blocks.push_back({std::string(raw.substr(start, end - start)), true});
        pos = end + close.size();
    }
    return blocks;
}

// Finds the first Finish[...] span with balanced brackets.
std::optional<std::string> scan_finish(std::string_view raw) {
    std::size_t pos = 0;
    while ((pos = raw.find("Finish[", pos)) != std::string_view::npos) {
        std::size_t open = pos + 6; // index of '['
        int depth = 0;
        for (std::size_t i = open; i < raw.size(); ++i) {
            if (raw[i] == '[') {
                ++depth;
            } else if (raw[i] == ']') {
                --depth;
                if (depth == 0) {
                    return std::string(raw.substr(open + 1, i - open - 1));
                }
            }
        }
        pos += 7; // unbalanced; try a later occurrence
    }
    return std::nullopt;
}

std::string stringify_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

} // namespace

const std::string& BrowseCommand::str_arg(std::size_t i) const {
    return std::get<std::string>(args.at(i));
}

double BrowseCommand::num_arg(std::size_t i) const {
    return std::get<double>(args.at(i));
}

std::vector<std::string> BrowseCommand::list_arg(std::size_t i) const {
    const ArgValue& v = args.at(i);
    if (const auto* s = std::get_if<std::string>(&v)) return {*s};
    return std::get<std::vector<std::string>>(v);
}

std::vector<BrowseCommand> parse_browse_program(std::string_view text) {
    Lexer lexer(text);
    std::vector<BrowseCommand> commands;

    Token tok = lexer.next();
    while (tok.kind != Token::Kind::end) {
        if (tok.kind != Token::Kind::ident) {
            throw BadLiteral("expected a command name, got '" + tok.text + "'");
        }
        BrowseCommand cmd;
        cmd.name = tok.text;

        tok = lexer.next();
        if (tok.kind != Token::Kind::lparen) {
            throw BadLiteral(cmd.name + ": expected '('");
        }

        tok = lexer.next();
        bool saw_kwarg = false;
        while (tok.kind != Token::Kind::rparen) {
            if (tok.kind == Token::Kind::ident) {
                // keyword argument
                std::string key = tok.text;
                tok = lexer.next();
                if (tok.kind != Token::Kind::equals) {
                    throw BadLiteral(cmd.name + ": expected '=' after '" + key + "'");
                }
                tok = lexer.next();
                if (key == "button") {
                    if (tok.kind != Token::Kind::string) {
                        throw ArityError(cmd.name + ": button must be a string");
                    }
                    cmd.button = tok.text;
                } else if (key == "modifiers") {
                    if (tok.kind != Token::Kind::lbracket) {
                        throw ArityError(cmd.name + ": modifiers must be a list");
                    }
                    tok = lexer.next();
                    while (tok.kind != Token::Kind::rbracket) {
                        if (tok.kind != Token::Kind::string) {
                            throw ArityError(cmd.name + ": modifiers must be strings");
                        }
                        cmd.modifiers.push_back(tok.text);
                        tok = lexer.next();
                        if (tok.kind == Token::Kind::comma) tok = lexer.next();
                    }
                } else {
                    throw ArityError(cmd.name + ": unknown keyword argument '" + key + "'");
                }
                saw_kwarg = true;
            } else if (tok.kind == Token::Kind::string) {
                if (saw_kwarg) throw BadLiteral(cmd.name + ": positional arg after keyword arg");
                cmd.args.emplace_back(tok.text);
            } else if (tok.kind == Token::Kind::number) {
                if (saw_kwarg) throw BadLiteral(cmd.name + ": positional arg after keyword arg");
                cmd.args.emplace_back(tok.number);
            } else if (tok.kind == Token::Kind::lbracket) {
                if (saw_kwarg) throw BadLiteral(cmd.name + ": positional arg after keyword arg");
                std::vector<std::string> items;
                tok = lexer.next();
                while (tok.kind != Token::Kind::rbracket) {
                    if (tok.kind != Token::Kind::string) {
                        throw BadLiteral(cmd.name + ": list items must be strings");
                    }
                    items.push_back(tok.text);
                    tok = lexer.next();
                    if (tok.kind == Token::Kind::comma) tok = lexer.next();
                }
                cmd.args.emplace_back(std::move(items));
            } else {
                throw BadLiteral(cmd.name + ": unexpected token '" + tok.text + "'");
            }

            tok = lexer.next();
            if (tok.kind == Token::Kind::comma) {
                tok = lexer.next();
            } else if (tok.kind != Token::Kind::rparen) {
                throw BadLiteral(cmd.name + ": expected ',' or ')'");
            }
        }

        // kwargs only exist on click/dblclick
        if (saw_kwarg) {
            auto it = signatures().find(cmd.name);
            if (it != signatures().end() && !it->second.kwargs) {
                throw ArityError(cmd.name + " does not take keyword arguments");
            }
        }
        validate_command(cmd);
        commands.push_back(std::move(cmd));
        tok = lexer.next();
    }

    if (commands.empty()) {
        throw BadLiteral("browse program contains no commands");
    }
    return commands;
}

std::string render_browse_command(const BrowseCommand& cmd) {
    std::ostringstream out;
    out << cmd.name << "(";
    bool first = true;
    for (const auto& arg : cmd.args) {
        if (!first) out << ", ";
        first = false;
        if (const auto* s = std::get_if<std::string>(&arg)) {
            out << escape_string(*s);
        } else if (const auto* n = std::get_if<double>(&arg)) {
            out << format_number(*n);
        } else {
            const auto& list = std::get<std::vector<std::string>>(arg);
            out << "[";
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (i) out << ", ";
                out << escape_string(list[i]);
            }
            out << "]";
        }
    }
    if (cmd.button != "left") {
        if (!first) out << ", ";
        first = false;
        out << "button=" << escape_string(cmd.button);
    }
    if (!cmd.modifiers.empty()) {
        if (!first) out << ", ";
        out << "modifiers=[";
        for (std::size_t i = 0; i < cmd.modifiers.size(); ++i) {
            if (i) out << ", ";
            out << escape_string(cmd.modifiers[i]);
        }
        out << "]";
    }
    out << ")";
    return out.str();
}

json api_program_to_json(const ApiProgram& program) {
    json calls = json::array();
    for (const auto& call : program.calls) {
        json c;
        c["method"] = call.method;
        c["path"] = call.path;
        if (!call.query.empty()) c["query"] = call.query;
        if (!call.headers.empty()) c["headers"] = call.headers;
        if (call.body) c["body"] = *call.body;
        if (!call.extract.empty()) c["extract"] = call.extract;
        if (call.paginate) {
            json p;
            p["param_name"] = call.paginate->param_name;
            if (call.paginate->page_size_param) p["page_size_param"] = *call.paginate->page_size_param;
            p["max_pages"] = call.paginate->max_pages;
            c["paginate"] = p;
        }
        calls.push_back(std::move(c));
    }
    return json{{"calls", std::move(calls)}};
}

ApiProgram api_program_from_json(const json& payload) {
    if (!payload.is_object() || !payload.contains("calls") || !payload["calls"].is_array()) {
        throw Error("api payload must be an object with a 'calls' array");
    }
    if (payload["calls"].empty()) {
        throw Error("api program has no calls");
    }
    ApiProgram program;
    for (const auto& c : payload["calls"]) {
        if (!c.is_object()) throw Error("each call must be an object");
        HttpCall call;
        call.method = to_upper(c.value("method", ""));
        static const std::array<std::string, 5> verbs = {"GET", "POST", "PUT", "DELETE", "PATCH"};
        if (std::find(verbs.begin(), verbs.end(), call.method) == verbs.end()) {
            throw Error("call method must be one of GET/POST/PUT/DELETE/PATCH");
        }
        call.path = c.value("path", "");
        if (call.path.empty()) throw Error("call path must be non-empty");
        if (c.contains("query")) {
            for (const auto& [k, v] : c["query"].items()) call.query[k] = stringify_scalar(v);
        }
        if (c.contains("headers")) {
            for (const auto& [k, v] : c["headers"].items()) call.headers[k] = stringify_scalar(v);
        }
        if (c.contains("body")) call.body = c["body"];
        if (c.contains("extract")) {
            for (const auto& [k, v] : c["extract"].items()) {
                if (!v.is_string()) throw Error("extract values must be JSON pointer strings");
                std::string ptr = v.get<std::string>();
                if (!ptr.empty() && ptr[0] != '/') {
                    throw Error("extract pointer must be empty or start with '/': " + ptr);
                }
                call.extract[k] = ptr;
            }
        }
        if (c.contains("paginate")) {
            const json& p = c["paginate"];
            Paginate pg;
            pg.param_name = p.value("param_name", "page");
            if (p.contains("page_size_param")) pg.page_size_param = p["page_size_param"].get<std::string>();
            pg.max_pages = p.value("max_pages", 50);
            if (pg.max_pages < 1) throw Error("paginate.max_pages must be >= 1");
            call.paginate = pg;
        }
        program.calls.push_back(std::move(call));
    }
    return program;
}

ParsedTurn parse_turn(std::string_view raw) {
    // Finish wins over any block: the protocol answers first, then exits.
    if (auto answer = scan_finish(raw)) {
        return {Action(Finish{*answer}), std::nullopt};
    }

    auto api_blocks = extract_blocks(raw, "execute_api");
    auto browse_blocks = extract_blocks(raw, "execute_browse");
    auto exit_blocks = extract_blocks(raw, "exit");
    auto finish_blocks = extract_blocks(raw, "finish");
    std::size_t total =
        api_blocks.size() + browse_blocks.size() + exit_blocks.size() + finish_blocks.size();

    if (total > 1) {
        return {std::nullopt,
                TurnError{TurnError::Kind::multiple_blocks,
                          "Your response contained " + std::to_string(total) +
                              " executable blocks. Include AT MOST ONE <execute_api>, "
                              "<execute_browse>, or exit block per response."}};
    }

    if (api_blocks.size() == 1) {
        const Block& block = api_blocks[0];
        if (!block.terminated) {
            return {std::nullopt,
                    TurnError{TurnError::Kind::malformed_block,
                              "<execute_api> block is missing its closing tag."}};
        }
        json payload = json::parse(block.payload, nullptr, false);
        if (payload.is_discarded() || !payload.is_object()) {
            return {std::nullopt,
                    TurnError{TurnError::Kind::malformed_block,
                              "<execute_api> payload must be a JSON object with either a "
                              "\"doc\" id or a \"calls\" array."}};
        }
        if (payload.contains("doc")) {
            if (!payload["doc"].is_string()) {
                return {std::nullopt, TurnError{TurnError::Kind::malformed_block,
                                                "\"doc\" must be an endpoint id string."}};
            }
            try {
                return {Action(DocLookup{catalog::EndpointId::parse(payload["doc"].get<std::string>())}),
                        std::nullopt};
            } catch (const Error& e) {
                return {std::nullopt, TurnError{TurnError::Kind::malformed_block, e.what()}};
            }
        }
        try {
            return {Action(api_program_from_json(payload)), std::nullopt};
        } catch (const Error& e) {
            return {std::nullopt, TurnError{TurnError::Kind::malformed_block, e.what()}};
        }
    }

    if (browse_blocks.size() == 1) {
        const Block& block = browse_blocks[0];
        if (!block.terminated) {
            return {std::nullopt,
                    TurnError{TurnError::Kind::malformed_block,
                              "<execute_browse> block is missing its closing tag."}};
        }
        try {
            return {Action(BrowseProgram{parse_browse_program(block.payload)}), std::nullopt};
        } catch (const Error& e) {
            return {std::nullopt, TurnError{TurnError::Kind::malformed_block, e.what()}};
        }
    }

    if (exit_blocks.size() == 1 || finish_blocks.size() == 1) {
        return {Action(Exit{}), std::nullopt};
    }

    return {Action(Message{std::string(raw)}), std::nullopt};
}

std::string render_action(const Action& action) {
    if (const auto* program = std::get_if<ApiProgram>(&action)) {
        return "<execute_api>" + api_program_to_json(*program).dump() + "</execute_api>";
    }
    if (const auto* browse = std::get_if<BrowseProgram>(&action)) {
        std::ostringstream out;
        out << "<execute_browse>\n";
        for (const auto& cmd : browse->commands) {
            out << render_browse_command(cmd) << "\n";
        }
        out << "</execute_browse>";
        return out.str();
    }
    if (const auto* lookup = std::get_if<DocLookup>(&action)) {
        json payload{{"doc", lookup->id.canonical()}};
        return "<execute_api>" + payload.dump() + "</execute_api>";
    }
    if (const auto* fin = std::get_if<Finish>(&action)) {
        return "Finish[" + fin->answer + "]";
    }
    if (const auto* msg = std::get_if<Message>(&action)) {
        return msg->text;
    }
    return "<exit></exit>";
}

json action_to_json(const Action& action) {
    if (const auto* program = std::get_if<ApiProgram>(&action)) {
        json j = api_program_to_json(*program);
        j["kind"] = "api_program";
        return j;
    }
    if (const auto* browse = std::get_if<BrowseProgram>(&action)) {
        json commands = json::array();
        for (const auto& cmd : browse->commands) commands.push_back(render_browse_command(cmd));
        return json{{"kind", "browse_program"}, {"commands", commands}};
    }
    if (const auto* lookup = std::get_if<DocLookup>(&action)) {
        return json{{"kind", "doc_lookup"}, {"id", lookup->id.canonical()}};
    }
    if (const auto* fin = std::get_if<Finish>(&action)) {
        return json{{"kind", "finish"}, {"answer", fin->answer}};
    }
    if (const auto* msg = std::get_if<Message>(&action)) {
        return json{{"kind", "message"}, {"text", msg->text}};
    }
    return json{{"kind", "exit"}};
}

std::string render_api_result(const std::vector<exec::HttpResult>& results,
                              const json& bindings, std::size_t byte_budget) {
    std::ostringstream out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const exec::HttpResult& r = results[i];
        out << "call " << (i + 1) << ": " << r.status;
        if (r.pages_fetched > 1) out << " (" << r.pages_fetched << " pages merged)";
        out << "\n";
        if (!r.note.empty()) out << "note: " << r.note << "\n";
        std::string body = r.body.dump(2);
        if (body.size() > byte_budget) {
            std::size_t dropped = body.size() - byte_budget;
            body.resize(byte_budget);
            body += "\n[truncated " + std::to_string(dropped) + " bytes]";
        }
        out << body << "\n";
    }
    if (bindings.is_object() && !bindings.empty()) {
        out << "bindings:\n";
        for (const auto& [name, value] : bindings.items()) {
            out << "  " << name << " = " << value.dump() << "\n";
        }
    }
    return out.str();
}

} // namespace webagents::actions
