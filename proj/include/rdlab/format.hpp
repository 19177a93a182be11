/// @file format.hpp
/// Round-trip number formatting and the shared error types.
#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace rdlab {

/// 17 significant digits; infinities as "inf"/"-inf".
inline std::string fmt17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Invalid or inconsistent configuration (exit status 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite solver state (exit status 3).
class BlowUpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rdlab
