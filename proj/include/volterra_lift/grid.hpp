#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "volterra_lift/errors.hpp"

namespace volterra_lift {

/// Uniform time grid t_j = j * step, j = 0..steps.
class TimeGrid {
 public:
  TimeGrid(double step, std::size_t steps) : step_(step), steps_(steps) {
    if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("time grid step must be positive and finite");
    if (steps < 1) throw DomainError("time grid needs at least one step");
  }

  /// Grid covering [0, horizon] with the given number of steps.
  static TimeGrid over(double horizon, std::size_t steps) {
    if (!(horizon > 0.0)) throw DomainError("time grid horizon must be positive");
    return TimeGrid(horizon / static_cast<double>(steps), steps);
  }

  double step() const noexcept { return step_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t size() const noexcept { return steps_ + 1; }
  double time(std::size_t j) const noexcept { return static_cast<double>(j) * step_; }
  double horizon() const noexcept { return time(steps_); }

  /// Index of the node equal to t (up to a relative 1e-9 of a step), or throws.
  std::size_t index_of(double t) const {
    const double r = t / step_;
    const double j = std::round(r);
    if (t < 0.0 || std::abs(r - j) > 1e-9 * std::max(1.0, j) || j > static_cast<double>(steps_))
      throw DomainError("time " + std::to_string(t) + " is not a node of the grid");
    return static_cast<std::size_t>(j);
  }

  /// Same step, truncated to the first `steps` steps.
  TimeGrid prefix(std::size_t steps) const { return TimeGrid(step_, steps); }

  bool operator==(const TimeGrid&) const = default;

 private:
  double step_;
  std::size_t steps_;
};

}  // namespace volterra_lift
