#pragma once

#include <stdexcept>
#include <string>

namespace pathosyn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument violates an operation's precondition (bad shape, bad range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Malformed, missing or corrupt on-disk data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence during a numerical procedure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Rejected configuration (unknown key, out-of-range value, digest drift).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pathosyn
