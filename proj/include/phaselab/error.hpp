#pragma once

#include <stdexcept>
#include <string>

namespace phaselab {

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing, unreadable, or in the wrong format.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf produced during a computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-fatal diagnostics go to stderr with a common prefix.
void warn(const std::string& message);

}  // namespace phaselab
