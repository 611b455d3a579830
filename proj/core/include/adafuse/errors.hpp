#pragma once

#include <stdexcept>
#include <string>

namespace adafuse {

// Root of everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension or shape disagreement between operands.
struct ShapeError : Error {
  using Error::Error;
};

// A vector whose norm is too small to define a direction.
struct DegenerateVectorError : Error {
  using Error::Error;
};

// The pre-normalization fused vector collapsed to (near) zero.
struct DegenerateFusionError : Error {
  using Error::Error;
};

// Regression input with no variance in the regressor.
struct DegenerateRegressionError : Error {
  using Error::Error;
};

// Caller violated an API precondition (stale activations, non-unit rows, ...).
struct ContractError : Error {
  using Error::Error;
};

// Invalid configuration value.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem-level failure (open, read, write).
struct IoError : Error {
  using Error::Error;
};

// A file exists and is readable but its contents do not match the format.
struct FormatError : Error {
  using Error::Error;
};

// Checkpoint with a format version newer than this library understands.
struct CheckpointVersionError : FormatError {
  using FormatError::FormatError;
};

// Checkpoint payload failed its CRC32.
struct CheckpointChecksumError : FormatError {
  using FormatError::FormatError;
};

// Checkpoint file ends before the declared contents.
struct CheckpointTruncatedError : FormatError {
  using FormatError::FormatError;
};

// Unknown id passed to an id-addressed lookup.
struct LookupError : Error {
  using Error::Error;
};

// Non-finite value where the algorithm cannot continue (NaN gradients).
struct NumericError : Error {
  using Error::Error;
};

// Input data rejected during construction/validation (duplicate ids,
// non-unit rows, ragged tables).
struct ValidationError : Error {
  using Error::Error;
};

} // namespace adafuse
