#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace himoe {

// Project-wide float serialization: 9 significant digits, '.' decimal
// separator, no locale dependence. Every CSV and report goes through this so
// identical values always produce identical bytes.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// Round-trips v through its serialized form. Generated datasets are snapped
// with this so that write -> read is an exact identity.
inline double quantize_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace himoe
