#pragma once

#include <stdexcept>
#include <string>

namespace anthracnose {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state or parameter left the domain where the equations are defined
/// (division guards, invalid ranges).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// A linear solve broke down or a system was singular.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Scenario configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace anthracnose
