#pragma once

#include <stdexcept>
#include <string>

namespace pq {

// Error taxonomy mirrored by the CLI exit codes:
//   config_error -> 2, artifact_error -> 3, numeric_error -> 4.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or incompatible on-disk artifact (checkpoint, prefix, stats).
struct artifact_error : std::runtime_error {
    explicit artifact_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime (divergence, NaN loss).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse: shape mismatch, missing calibration, bad preconditions.
struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pq
