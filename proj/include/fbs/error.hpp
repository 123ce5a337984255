#pragma once

#include <stdexcept>
#include <string>

namespace fbs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: bad parameters, malformed configuration, inconsistent sizes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Two objects that must share a Fock basis do not.
class BasisMismatch : public Error {
 public:
  using Error::Error;
};

/// A propagator or series failed (singular time, divergence, trace drift).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbs
