#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace blsacd {

/// Shortest decimal text that reads back to the same double; "nan"/"inf" as is.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace blsacd
