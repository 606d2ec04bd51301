#pragma once

// Invariant cones of the deterministic lift d lambda/dt = A^w lambda with
//   A^w = diag(-x_1, ..., -x_N) - w (c_1 1, ..., c_N 1)^T,
// E^w = { lambda0 : <exp(t A^w) lambda0, 1> >= 0 for all t >= 0 },
// E   = intersection of E^w over w > 0 (approximated on a finite w grid).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"
#include "volterra_lift/kernel.hpp"
#include "volterra_lift/resolvent.hpp"

namespace volterra_lift {

/// 11 log-spaced points 10^-2 ... 10^3.
inline std::vector<double> default_w_grid() {
  std::vector<double> w(11);
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::pow(10.0, -2.0 + 0.5 * static_cast<double>(k));
  return w;
}

struct ConeCheckConfig {
  double horizon = 0.0;  // 0: 50 / smallest positive rate (or 50)
  double step = 0.0;     // 0: horizon / 2000
  double tol = 0.0;      // 0: 1e-9 * |lambda0|_1
  std::vector<double> w_grid = default_w_grid();

  bool operator==(const ConeCheckConfig&) const = default;
};

inline void validate(const ConeCheckConfig& cfg) {
  if (cfg.horizon < 0.0 || !std::isfinite(cfg.horizon)) throw ConfigError("cone.horizon", "cone.horizon must be positive");
  if (cfg.step < 0.0 || !std::isfinite(cfg.step)) throw ConfigError("cone.step", "cone.step must be positive");
  if (cfg.tol < 0.0 || !std::isfinite(cfg.tol)) throw ConfigError("cone.tol", "cone.tol must be nonnegative");
  for (std::size_t k = 0; k < cfg.w_grid.size(); ++k) {
    if (!(cfg.w_grid[k] > 0.0) || !std::isfinite(cfg.w_grid[k]))
      throw ConfigError("cone.w_grid", "cone.w_grid entries must be positive");
    if (k > 0 && !(cfg.w_grid[k] > cfg.w_grid[k - 1]))
      throw ConfigError("cone.w_grid", "cone.w_grid must be strictly increasing");
  }
}

struct ConeReport {
  bool member = true;
  std::optional<double> failing_w;
  std::optional<double> first_negative_time;
  double min_total_mass = 0.0;
  bool asymptotic_failure = false;  // the slowest mode drives the mass negative after the horizon
};

inline Eigen::MatrixXd lift_generator(const LiftMeasure& nu, double w) {
  const auto n = static_cast<Eigen::Index>(nu.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& at = nu[static_cast<std::size_t>(i)];
    a.row(i).setConstant(-w * at.weight);
    a(i, i) -= at.rate;
  }
  return a;
}

inline double default_cone_horizon(const LiftMeasure& nu) {
  const double x = nu.smallest_positive_rate();
  return x > 0.0 ? 50.0 / x : 50.0;
}

namespace detail {

// Sign of the total mass carried by the dominant mode of A^w in `state`;
// true when that mode makes the mass eventually negative.
inline bool dominant_mode_negative(const Eigen::MatrixXd& a, const Eigen::VectorXd& state, double tol) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) return false;
  const auto vals = es.eigenvalues();
  const Eigen::MatrixXcd vecs = es.eigenvectors();
  Eigen::Index top = 0;
  for (Eigen::Index i = 1; i < vals.size(); ++i)
    if (vals(i).real() > vals(top).real()) top = i;
  // coefficients of the state in the eigenbasis
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(vecs);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXcd coeff = lu.solve(state.cast<std::complex<double>>());
  const double scale = std::max(state.lpNorm<1>(), std::numeric_limits<double>::min());
  double mass_scale = 0.0;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (std::abs(vals(i).real() - vals(top).real()) > 1e-12 * std::max(1.0, std::abs(vals(top).real()))) continue;
    const std::complex<double> m = coeff(i) * vecs.col(i).sum();
    if (std::abs(m) <= 1e-10 * scale) continue;
    if (std::abs(vals(i).imag()) > 1e-12) return true;  // oscillating dominant mode
    mass_scale += m.real();
  }
  return mass_scale < -std::max(tol, 1e-10 * scale);
}

}  // namespace detail

inline ConeReport membership_Ew_report(const LiftState& lambda0, const LiftMeasure& nu, double w,
                                       const ConeCheckConfig& cfg = {}) {
  require_aligned(lambda0, nu);
  if (!(w >= 0.0)) throw DomainError("w must be nonnegative");
  validate(cfg);
  const double horizon = cfg.horizon > 0.0 ? cfg.horizon : default_cone_horizon(nu);
  const double step = cfg.step > 0.0 ? cfg.step : horizon / 2000.0;
  const auto n_steps = static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));

  const auto n = static_cast<Eigen::Index>(nu.size());
  Eigen::VectorXd state(n);
  for (Eigen::Index i = 0; i < n; ++i) state(i) = lambda0.masses[static_cast<std::size_t>(i)];
  const double tol = cfg.tol > 0.0 ? cfg.tol : 1e-9 * state.lpNorm<1>();

  ConeReport rep;
  rep.min_total_mass = state.sum();
  if (n == 0) return rep;
  const Eigen::MatrixXd a = lift_generator(nu, w);
  const Eigen::MatrixXd propagator = (a * step).exp();
  auto record = [&](double t) {
    const double mass = state.sum();
    rep.min_total_mass = std::min(rep.min_total_mass, mass);
    if (mass < -tol && !rep.first_negative_time) rep.first_negative_time = t;
  };
  record(0.0);
  for (std::size_t k = 1; k <= n_steps && !rep.first_negative_time; ++k) {
    state = propagator * state;
    record(step * static_cast<double>(k));
  }
  if (!rep.first_negative_time && detail::dominant_mode_negative(a, state, tol)) rep.asymptotic_failure = true;
  rep.member = !rep.first_negative_time && !rep.asymptotic_failure;
  if (!rep.member) rep.failing_w = w;
  return rep;
}

inline bool membership_Ew(const LiftState& lambda0, const LiftMeasure& nu, double w, const ConeCheckConfig& cfg = {}) {
  return membership_Ew_report(lambda0, nu, w, cfg).member;
}

/// Membership in E: every w of the grid must pass. Reports the smallest failing w.
inline ConeReport membership_E_report(const LiftState& lambda0, const LiftMeasure& nu, const ConeCheckConfig& cfg = {}) {
  if (cfg.w_grid.empty()) throw ConfigError("cone.w_grid", "cone.w_grid must not be empty");
  validate(cfg);
  ConeReport total;
  total.min_total_mass = std::numeric_limits<double>::infinity();
  for (double w : cfg.w_grid) {
    const auto rep = membership_Ew_report(lambda0, nu, w, cfg);
    total.min_total_mass = std::min(total.min_total_mass, rep.min_total_mass);
    if (!rep.member && total.member) {
      total.member = false;
      total.failing_w = w;
      total.first_negative_time = rep.first_negative_time;
      total.asymptotic_failure = rep.asymptotic_failure;
    }
  }
  return total;
}

inline bool membership_E(const LiftState& lambda0, const LiftMeasure& nu, const ConeCheckConfig& cfg = {}) {
  return membership_E_report(lambda0, nu, cfg).member;
}

/// K >= -tol on the grid and R^w >= -tol for every w: a numerical form of the
/// condition that keeps the damped measures S*_u nu inside every E^w.
inline bool sufficient_cm_condition(const Kernel& k, const std::vector<double>& w_grid, const TimeGrid& grid,
                                    double tol) {
  const std::size_t first = kernel_is_singular(k) ? 1 : 0;
  for (std::size_t j = first; j < grid.size(); ++j)
    if (eval_kernel(k, grid.time(j)) < -tol) return false;
  // Large w makes R^w decay within a fraction of the caller's step. Such w are
  // checked on a finer grid of at most max(steps, 4000) nodes.
  const std::size_t cap = std::max<std::size_t>(grid.steps(), 4000);
  for (double w : w_grid) {
    TimeGrid g = grid;
    const double h = resolved_step(k, w);
    if (h < grid.step()) {
      const auto n = static_cast<std::size_t>(std::min<double>(static_cast<double>(cap), std::ceil(grid.horizon() / h)));
      g = TimeGrid(h, std::max<std::size_t>(n, 2));
    }
    if (!resolvent_nonnegative(resolvent_second_kind(k, w, g), tol)) return false;
  }
  return true;
}

}  // namespace volterra_lift
