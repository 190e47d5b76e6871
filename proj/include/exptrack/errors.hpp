#pragma once

#include <stdexcept>
#include <string>

namespace exptrack {

// Base for every error raised by the library. Each subclass maps to one
// failure class the command-line front end turns into an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between a model and the vectors handed to it.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise malformed numeric input.
class InputError : public Error {
 public:
  using Error::Error;
};

// M(q) failed its Cholesky factorization.
class ModelDefinitenessError : public Error {
 public:
  using Error::Error;
};

// lambda <= 0, P not symmetric positive definite, wrong P size.
class GainValidationError : public Error {
 public:
  using Error::Error;
};

// P*M(q) is not symmetric, so the composite certificate is not valid.
class CertificateValidityError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class SpecValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when an integrated state blows up or turns non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(double t, const std::string& what)
      : Error("divergence at t=" + std::to_string(t) + ": " + what), time_(t) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace exptrack
