#pragma once

#include <stdexcept>
#include <string>

namespace bandwig {

// Invalid user-supplied parameters or configuration (maps to CLI exit code 2).
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failure: non-convergence, ill-conditioning, failed residual checks
// (maps to CLI exit code 3).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bandwig
