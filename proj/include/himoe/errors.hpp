#pragma once

#include <stdexcept>
#include <string>

namespace himoe {

// Error taxonomy used across the library. Each category maps to a distinct
// failure mode so tests and callers can discriminate.

// Invalid or inconsistent configuration values.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Tensor shape / dimensionality mismatch.
struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument("dimension error: " + msg) {}
};

// Violated API contract (preconditions, call-order rules).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error("contract error: " + msg) {}
};

// Malformed or inconsistent on-disk data.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

// Training-time failure (divergence, non-finite loss).
struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error("train error: " + msg) {}
};

}  // namespace himoe
