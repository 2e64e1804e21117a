#pragma once

#include <stdexcept>
#include <string>

namespace adaptrial {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The jittered Gram matrix is not numerically positive definite.
struct FactorizationFailure : Error {
  using Error::Error;
};

/// A utility function returned NaN or infinity at a grid point.
struct NonFiniteUtility : Error {
  using Error::Error;
};

/// live_step was called while no dose recommendation is pending.
struct NoPendingDose : Error {
  using Error::Error;
};

/// A live outcome was NaN or infinity.
struct NonFiniteOutcome : Error {
  using Error::Error;
};

/// No grid point falls inside the requested metric region.
struct EmptyRegion : Error {
  using Error::Error;
};

/// Malformed config or snapshot text; carries line number and key.
struct ParseError : Error {
  ParseError(int line_no, const std::string& key, const std::string& what_arg)
      : Error("line " + std::to_string(line_no) + ", key '" + key + "': " + what_arg),
        line(line_no),
        key(key) {}
  int line;
  std::string key;
};

/// Well-formed text whose values violate a config invariant.
struct ValidationError : Error {
  explicit ValidationError(const std::string& name, const std::string& what_arg)
      : Error("'" + name + "': " + what_arg), name(name) {}
  std::string name;
};

}  // namespace adaptrial
