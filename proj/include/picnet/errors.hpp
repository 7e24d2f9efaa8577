#pragma once

#include <stdexcept>
#include <string>

namespace picnet {

// Base class for all library errors. The CLI maps these onto exit codes:
// validation-class errors exit 1, numeric failures exit 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor extents do not agree (mismatched operands, bad kernel geometry, ...).
struct ShapeError : Error {
  using Error::Error;
};

// Invalid configuration value (hyperparameters, palette size, pool geometry).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent dataset content (files, labels, splits).
struct DataError : Error {
  using Error::Error;
};

// Non-finite values where finite arithmetic is required.
struct NumericError : Error {
  using Error::Error;
};

// API misuse: non-scalar backward seed, missing gradients, inactive tape.
struct UsageError : Error {
  using Error::Error;
};

// Filesystem failures (unwritable paths, truncated payloads).
struct IoError : Error {
  using Error::Error;
};

}  // namespace picnet
