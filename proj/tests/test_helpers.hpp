#pragma once

#include <fstream>
#include <sstream>
#include <string>

inline std::string data_dir() {
    if (const char* env = std::getenv("WEBAGENTS_DATA_DIR")) return env;
    return WEBAGENTS_DEFAULT_DATA_DIR;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}
