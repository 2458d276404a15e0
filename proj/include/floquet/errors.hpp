#pragma once

#include <stdexcept>
#include <string>

namespace floquet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside the mathematical domain of the operation
/// (bad axis label, odd index set where an even one is required, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The operation is not defined for this boundary type.
class UnsupportedGeometry : public Error {
 public:
  using Error::Error;
};

/// A numerical precondition failed (non-unitary input, loop not closed, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A branch cut or band edge sits on (or too close to) the spectrum.
class GapViolation : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Malformed configuration or protocol file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace floquet
