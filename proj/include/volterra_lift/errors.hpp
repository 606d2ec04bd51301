#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace volterra_lift {

/// Argument outside the mathematical domain of an operation (alpha, t, w, u ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Evaluation point outside a tabulated range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Mismatched dimensions between states, measures and grids.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite intermediate values (blow-up, divergence).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_ = 0;
};

/// Invalid model configuration. Carries the dotted key path of the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace volterra_lift
