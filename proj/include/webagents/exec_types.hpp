#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace webagents::exec {

// Outcome of one HttpCall (all pages merged when pagination was requested).
struct HttpResult {
    int status = 0;
    std::map<std::string, std::string> headers;
    nlohmann::json body; // parsed JSON, or a JSON string holding raw text
    int pages_fetched = 1;
    std::string note; // pagination / extraction warnings, empty when clean
};

} // namespace webagents::exec
