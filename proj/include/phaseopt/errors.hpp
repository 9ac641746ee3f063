#pragma once

#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

namespace phaseopt {

/// Short %g rendering of a number for error messages.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedDimension : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Potential evaluated outside (0,1).
class DomainViolation : public Error {
 public:
  using Error::Error;
};

/// Control outside [0, U].
class InfeasibleControl : public Error {
 public:
  using Error::Error;
};

/**
 * Failure inside a time march or an optimization loop.
 *
 * The failing time step and optimizer iterate are attached as the error
 * propagates outward; what() reports both once known.
 */
class SolverError : public Error {
 public:
  explicit SolverError(const std::string& msg) : Error(msg), base_(msg), text_(msg) {}

  void set_step(int step) {
    step_ = step;
    rebuild();
  }
  void set_iterate(int iterate) {
    iterate_ = iterate;
    rebuild();
  }
  std::optional<int> step() const noexcept { return step_; }
  std::optional<int> iterate() const noexcept { return iterate_; }

  const char* what() const noexcept override { return text_.c_str(); }

 private:
  void rebuild() {
    text_ = base_;
    if (step_) text_ += " (time step " + std::to_string(*step_) + ")";
    if (iterate_) text_ += " (optimizer iterate " + std::to_string(*iterate_) + ")";
  }

  std::string base_;
  std::string text_;
  std::optional<int> step_;
  std::optional<int> iterate_;
};

class NewtonDivergence : public SolverError {
 public:
  using SolverError::SolverError;
};

class LinearSolveFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Diagonal coefficient of the mu-step lost positivity (time step too large).
class NonpositiveCoefficient : public SolverError {
 public:
  using SolverError::SolverError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingKey : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

}  // namespace phaseopt
