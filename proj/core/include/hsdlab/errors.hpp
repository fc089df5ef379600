#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hsd {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment and argument errors.
class DomainError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An id reference (policy, mdp, direction, run) could not be resolved.
class ResolutionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::int64_t step)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

// Solver failures.
class SolverError : public Error {
 public:
  using Error::Error;
};

class DegenerateDirectionError : public SolverError {
 public:
  using SolverError::SolverError;
};

class BoundaryUnreachedError : public SolverError {
 public:
  using SolverError::SolverError;
};

class TieBreakError : public SolverError {
 public:
  using SolverError::SolverError;
};

// Persistence.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Harness and theory.
class DegenerateScaleError : public NumericError {
 public:
  using NumericError::NumericError;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class NoShiftError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsd
