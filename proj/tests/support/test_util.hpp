#pragma once

#include <fstream>
#include <sstream>
#include <string>

namespace ledro::testutil {

inline std::string fixture_path(const std::string& rel) {
    return std::string(LEDRO_TEST_FIXTURE_DIR) + "/" + rel;
}

inline std::string benchmark_path(const std::string& rel) {
    return std::string(LEDRO_BENCHMARK_DIR) + "/" + rel;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    if (!out) throw std::runtime_error("cannot write: " + path);
}

} // namespace ledro::testutil
