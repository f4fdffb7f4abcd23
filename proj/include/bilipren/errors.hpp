#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bilipren {

/// Caller passed something that violates a documented precondition
/// (shape mismatch, bad ordering of bounds, non-symmetric input, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base class for failures that come out of the numerics rather than
/// from bad arguments.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-point equilibrium solve did not reach tolerance.
class IterationFailure : public NumericalError {
 public:
  IterationFailure(const std::string& what, double residual, int iterations)
      : NumericalError(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Feedthrough matrix too ill-conditioned to invert.
class InversionError : public NumericalError {
 public:
  InversionError(const std::string& what, double condition)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Plant or model trajectory left the finite range.
class SimulationError : public NumericalError {
 public:
  SimulationError(const std::string& what, std::size_t step)
      : NumericalError(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Training produced a non-finite loss or gradient. Carries the loss
/// history recorded up to that point.
class DivergenceError : public NumericalError {
 public:
  explicit DivergenceError(const std::string& what, std::vector<double> history = {})
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// A model failed its LMI certificate.
class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bilipren
