#pragma once

#include <stdexcept>
#include <string>

namespace rlf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure ran out of its node/iteration budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// A ball average was requested over a ball containing no grid point.
class EmptyBall : public Error {
 public:
  using Error::Error;
};

/// A monotone inversion target lies outside the bracket image.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// Two ensembles do not share the same grid or time mesh.
class MeshMismatch : public Error {
 public:
  using Error::Error;
};

/// Witness calibration could not use a single pair.
class CalibrationFailed : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration is malformed or violates the schema.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace rlf
