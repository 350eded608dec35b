#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spectral {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (unsorted input, n < 2, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The input is mathematically degenerate for the requested quantity
// (zero matrix for an effective rank, zero trace, ...).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// An eigensolver did not reach its tolerance within the iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// A model parameterization failed one of its defining inequalities.
// `index` is the 1-based eigenvalue index of the first violation.
class ParameterError : public Error {
 public:
  ParameterError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// Sample size too small for the calibrated constants: 4 c1 sqrt(ln n / n) >= 1.
class SampleTooSmall : public Error {
 public:
  using Error::Error;
};

// Experiment configuration is malformed or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace spectral
