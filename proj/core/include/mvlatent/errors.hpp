#pragma once

#include <stdexcept>
#include <string>

namespace mvlatent {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape or size mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

/// NaN/Inf encountered where a finite value is required.
struct NumericError : Error {
  using Error::Error;
};

/// Named entity (parameter, key) not found.
struct LookupError : Error {
  using Error::Error;
};

/// Invalid value passed to an operation (valid shape, bad content).
struct InvalidArgument : Error {
  using Error::Error;
};

/// Bad configuration: schema violations, out-of-range hyperparameters.
struct ConfigError : Error {
  using Error::Error;
};

/// On-disk format violations: bad magic, truncation, inconsistent header.
struct FormatError : Error {
  using Error::Error;
};

/// Filesystem-level failures (open, read, write).
struct IoError : Error {
  using Error::Error;
};

}  // namespace mvlatent
