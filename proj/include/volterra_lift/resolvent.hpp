#pragma once

// Resolvent of the second kind of wK on a uniform grid:
//   w K - R = w K * R.
//
// The unknown is split as R = w K - Q. Q = w K * R is continuous with
// Q(0) = 0 even when K is singular at the origin, and solves
//   Q = w^2 (K * K) - w K * Q,
// which is discretized by product integration: exact cell integrals of K
// against Q linear on each cell, the current node treated implicitly.

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>
#include <span>
#include <vector>

#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"
#include "volterra_lift/kernel.hpp"

namespace volterra_lift {

struct ResolventTable {
  TimeGrid grid;
  std::vector<double> values;  // R^w(t_j)
  double w = 0.0;
  CellMoments weights;  // cell integrals of K used to build the table
  double tolerance = 1e-10;
  bool origin_extrapolated = false;  // R^w(0) is not finite for singular K
};

namespace detail {

inline double resolvent_residual_at(const CellMoments& mom, std::span<const double> kk, std::span<const double> q,
                                    double w, std::size_t j) {
  return q[j] - w * w * kk[j] + w * product_convolution(mom, q, j);
}

}  // namespace detail

inline ResolventTable resolvent_second_kind(const Kernel& k, double w, const TimeGrid& grid) {
  if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("resolvent scale w must be finite and nonnegative");
  ResolventTable table{grid, std::vector<double>(grid.size(), 0.0), w, cell_moments(k, grid)};
  const bool singular = kernel_is_singular(k);
  table.tolerance = singular ? 1e-6 : 1e-10;
  table.origin_extrapolated = singular;
  if (w == 0.0) return table;

  const auto& mom = table.weights;
  const auto kk = self_convolution(k, grid);
  std::vector<double> q(grid.size(), 0.0);
  const double diag = 1.0 + w * (mom.m0[0] - mom.m1[0]);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double known = product_convolution(mom, q, j);  // q[j] is still 0 here
    q[j] = (w * w * kk[j] - w * known) / diag;
    if (!std::isfinite(q[j])) throw NumericalError("non-finite resolvent value", j);
    table.values[j] = w * eval_kernel(k, grid.time(j)) - q[j];
  }
  if (singular) {
    table.values[0] = grid.steps() >= 2 ? 2.0 * table.values[1] - table.values[2] : table.values[1];
  } else {
    table.values[0] = w * kernel_at_origin(k);
  }
  return table;
}

/// sup_j |w K(t_j) - R(t_j) - w (K * R)(t_j)| with the solver's own convolution.
inline double check_resolvent_identity(const Kernel& k, const ResolventTable& r) {
  if (r.values.size() != r.grid.size()) throw ShapeError("resolvent table length does not match its grid");
  if (r.weights.size() != 0 && r.weights.size() != r.grid.steps())
    throw ShapeError("resolvent table weights do not match its grid");
  const double w = r.w;
  if (w == 0.0) {
    double m = 0.0;
    for (double v : r.values) m = std::max(m, std::abs(v));
    return m;
  }
  const auto mom = cell_moments(k, r.grid);
  const auto kk = self_convolution(k, r.grid);
  const bool singular = kernel_is_singular(k);
  std::vector<double> q(r.grid.size(), 0.0);
  if (!singular) q[0] = w * kernel_at_origin(k) - r.values[0];
  for (std::size_t j = 1; j < r.grid.size(); ++j) q[j] = w * eval_kernel(k, r.grid.time(j)) - r.values[j];

  double worst = singular ? 0.0 : std::abs(q[0]);
  for (std::size_t j = 1; j < r.grid.size(); ++j)
    worst = std::max(worst, std::abs(detail::resolvent_residual_at(mom, kk, q, w, j)));
  return worst;
}

/// Largest step h with w * int_0^h |K| <= target, so R^w is resolved on the first cell.
inline double resolved_step(const Kernel& k, double w, double target = 0.05) {
  if (!(w > 0.0)) return std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& kk) -> double {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, Fractional>) {
          return std::pow(target * std::tgamma(kk.alpha + 1.0) / w, 1.0 / kk.alpha);
        } else if constexpr (std::is_same_v<T, ExponentialSum>) {
          double bound = 0.0;
          for (const auto& a : kk.measure.atoms()) bound += std::abs(a.weight);
          return bound > 0.0 ? target / (w * bound) : std::numeric_limits<double>::infinity();
        } else {
          double bound = 0.0;
          for (double v : kk.values) bound = std::max(bound, std::abs(v));
          return bound > 0.0 ? target / (w * bound) : std::numeric_limits<double>::infinity();
        }
      },
      k);
}

inline bool resolvent_nonnegative(const ResolventTable& r, double tol) {
  return std::all_of(r.values.begin(), r.values.end(), [tol](double v) { return v >= -tol; });
}

}  // namespace volterra_lift
