#pragma once

#include <stdexcept>
#include <string>

namespace qtraj {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state vector that cannot be normalized (zero norm, non-finite entries).
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// A density matrix that is not Hermitian, not unit trace, or not PSD.
class InvalidDensityError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with input that violates its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A measurement or run configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A Kraus operator annihilated the state; the sampler drew an outcome
/// that has zero probability.
class ImpossibleOutcomeError : public Error {
 public:
  using Error::Error;
};

/// The rejection envelope was exceeded, i.e. the acceptance bound is wrong.
class EnvelopeViolationError : public Error {
 public:
  using Error::Error;
};

/// File or stream failure; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qtraj
