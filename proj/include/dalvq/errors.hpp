#pragma once

#include <stdexcept>
#include <string>

namespace dalvq {

/// Caller passed arguments that cannot be combined (dimension mismatch, index out of range).
class UsageError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration or specification is invalid or infeasible. Surfaced before any tick runs.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant, e.g. a schedule asking for a version older than the history keeps.
class InternalError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace dalvq
