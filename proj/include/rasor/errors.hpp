#pragma once

#include <stdexcept>
#include <string>

namespace rasor {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shape disagreement (names both shapes in the message).
struct DimError : Error {
  using Error::Error;
};

/// A precondition of an operation was violated.
struct ContractError : Error {
  using Error::Error;
};

/// Bad configuration value or unknown key.
struct ConfigError : Error {
  using Error::Error;
};

/// File content does not match the expected format.
struct FormatError : Error {
  using Error::Error;
};

/// File could not be read or written.
struct IoError : Error {
  using Error::Error;
};

}  // namespace rasor
