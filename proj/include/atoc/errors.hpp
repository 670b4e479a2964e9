#pragma once

#include <stdexcept>
#include <string>

namespace atoc {

// Base for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible array shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A NaN or Inf showed up where only finite values are allowed.
struct NumericError : Error {
  using Error::Error;
};

// Invalid run configuration (bad field, missing key, out-of-range value).
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint file problems, with the failure class attached so callers can
// tell a stale format from a corrupt file.
struct CheckpointError : Error {
  enum class Kind { NotFound, VersionMismatch, Truncated, Schema };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

}  // namespace atoc
