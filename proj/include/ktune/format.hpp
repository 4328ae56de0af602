#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <system_error>

namespace ktune {

/// Shortest round-trip decimal form of a double, identical on every run of
/// the same build (std::to_chars, no locale involvement).
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Fixed-precision decimal form (used where a stable column width matters
/// more than shortness, e.g. human-facing summaries).
inline std::string format_fixed(double value, int digits) {
    char buf[512];
    int n = std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
    return std::string(buf, buf + (n < 0 ? 0 : n));
}

}  // namespace ktune
