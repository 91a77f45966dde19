#pragma once

#include <stdexcept>
#include <string>

namespace csbp {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (negative theta,
/// lambda below lambda*, Grey's condition failing, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A law that cannot be sampled (eta_1, an edge-immigration law with no jumps).
class InvalidLawError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A numerical procedure failed to reach its tolerance, or two independent
/// evaluations of the same quantity disagree.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A numerical test could not decide (Grey's slope test near 1).
class IndeterminateError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace csbp
