#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "utvi/errors.hpp"

namespace utvi {

/// Shortest decimal form that parses back to exactly the same double.
inline std::string fmt17(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const char* what) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ArtifactError(std::string(what) + ": malformed number '" + std::string(s) + "'");
    }
    return v;
}

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace utvi
