#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ptsb {

/// Invalid model, bath or solver parameter.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration key, value or type. Always names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Requested Fock space exceeds the configured dimension cap.
class DimensionError : public ParameterError {
 public:
  DimensionError(std::size_t dimension, std::size_t cap)
      : ParameterError("Fock space dimension " + std::to_string(dimension) +
                       " exceeds cap " + std::to_string(cap)),
        dimension_(dimension) {}
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Base class for failures of a numerical method on valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : NumericalError(what + " (iterations=" + std::to_string(iterations) +
                       ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A mode whose displacement denominator omega_k (A + B + omega_k) vanishes.
class SingularModeError : public NumericalError {
 public:
  explicit SingularModeError(std::size_t mode)
      : NumericalError("near-resonant displacement denominator at mode " + std::to_string(mode)),
        mode_(mode) {}
  std::size_t mode() const noexcept { return mode_; }

 private:
  std::size_t mode_;
};

}  // namespace ptsb
