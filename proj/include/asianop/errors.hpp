#pragma once

#include <stdexcept>
#include <string>

namespace asianop {

// Error classes map onto process exit codes in the CLI:
// ConfigError -> 1, NumericalError -> 2, ValidationError -> 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requesting the one-dimensional reduction for a payoff that does not
// support it is a configuration mistake, not a numerical failure.
struct ReductionError : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace asianop
