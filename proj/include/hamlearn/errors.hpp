#pragma once

#include <stdexcept>
#include <string>

namespace hamlearn {

/// Bad user-facing configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical integration failure, e.g. step-size underflow (CLI exit code 3).
struct IntegrationError : std::runtime_error {
    explicit IntegrationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite loss or gradient during training (CLI exit code 4).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed / corrupted artifact files.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Linear-solve breakdown; carries the failing pivot index in the message.
struct SolveError : std::runtime_error {
    int pivot_index;
    SolveError(const std::string& msg, int pivot) : std::runtime_error(msg), pivot_index(pivot) {}
};

} // namespace hamlearn
