#pragma once

#include <stdexcept>
#include <string>

namespace btseq {

// Error taxonomy used across the library. The CLI maps these onto exit
// codes: ConfigError -> 3, everything else -> 1 (usage errors are handled
// by the argument parser itself).

struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a metric has no defined value (e.g. zero n-grams in the
// pool). Deliberately not conflated with a 0.0 score.
struct UndefinedMetricError : InputError {
    explicit UndefinedMetricError(const std::string& msg) : InputError(msg) {}
};

}  // namespace btseq
