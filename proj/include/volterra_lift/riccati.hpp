#pragma once

// Riccati equations of the affine transform formula, for real arguments u <= 0.
//
//   R(u) = beta u + sigma^2 u^2 / 2 + int (exp(u xi) - 1 - u xi) m(dxi)
//
// Volterra form:  psi_t = u K(t) + int_0^t K(t-s) R(psi_s) ds
// Lifted form:    y_i' = -x_i y_i + R(<y, nu>),  y_i(0) = u
//
// Both discretizations treat the forcing F_s = R(psi_s) as linear on each grid
// cell and integrate the kernel exactly against it (product integration for
// the Volterra form, an exponential integrator for the lifted form). One
// predictor (F frozen over the step) and one corrector pass per step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "volterra_lift/driver.hpp"
#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"
#include "volterra_lift/kernel.hpp"

namespace volterra_lift {

inline void require_polar(double u) {
  if (!(u <= 0.0)) throw DomainError("transform argument u must be <= 0");
}

inline double nonlinearity_R(double u, const DriverParams& drv) {
  require_polar(u);
  return drv.beta * u + 0.5 * drv.sigma * drv.sigma * u * u + jump_compensated_exponent(drv.jumps, u);
}

/// Nonlinearity of the pure-jump approximation with jumps of size 1/n:
/// diffusion replaced by sigma^2 n^2 (exp(u/n) - 1 - u/n), m truncated to (1/n, inf).
inline double nonlinearity_pure_jump(double u, const DriverParams& drv, std::size_t n) {
  require_polar(u);
  const double nn = static_cast<double>(n);
  const double z = u / nn;
  return drv.beta * u + drv.sigma * drv.sigma * nn * nn * (std::expm1(z) - z) +
         jump_compensated_exponent(drv.jumps, u, 1.0 / nn);
}

struct RiccatiPath {
  TimeGrid grid;
  double u = 0.0;
  std::vector<double> psi;             // psi(t_j), the corrected value fed to the nonlinearity; -inf at t_0 if K is singular
  std::vector<double> forcing;         // R(psi(t_j)); non-finite at t_0 for singular kernels
  std::vector<std::vector<double>> y;  // lifted coordinates per node (history state), empty for the Volterra form
};

namespace detail {

/// Power of the leading singularity of R(psi_s) near s = 0 for the fractional kernel.
inline double forcing_singularity_power(double alpha, const DriverParams& drv) {
  return drv.sigma > 0.0 ? 2.0 * alpha - 2.0 : alpha - 1.0;
}

/// int_0^dt K(t_j - s) (s/dt)^p ds
inline double singular_cell_weight(const Fractional& f, double p, const TimeGrid& grid, std::size_t j) {
  const double h = grid.step();
  if (j == 1) return std::pow(h, f.alpha) * std::beta(f.alpha, p + 1.0) / std::tgamma(f.alpha);
  const double tj = grid.time(j);
  const double e = 1.0 / (p + 1.0);
  const Kernel k = f;
  // s = dt v^(1/(p+1)) removes the singular factor
  return h / (p + 1.0) *
         boost::math::quadrature::gauss<double, 20>::integrate(
             [&](double v) { return eval_kernel(k, tj - h * std::pow(v, e)); }, 0.0, 1.0);
}

/// Negative root of psi = a + w R(psi) for a < 0. Falls back to the explicit
/// value a + w R(a) when no sign change is found.
template <class Nonlin>
double first_cell_root(double a, double w, Nonlin& nonlin) {
  auto g = [&](double v) { return a + w * nonlin(v) - v; };
  double lo = a;
  for (int k = 0; k < 200 && g(lo) < 0.0; ++k) lo *= 2.0;
  if (!(g(lo) >= 0.0)) return std::min(a + w * nonlin(a), 0.0);
  if (g(lo) == 0.0) return lo;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, lo, 0.0, g(lo), a,
                                                   boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

template <class Nonlin>
RiccatiPath riccati_volterra_impl(double u, const Kernel& k, Nonlin&& nonlin, const TimeGrid& grid, double p) {
  require_polar(u);
  RiccatiPath out{grid, u, std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0), {}};
  if (u == 0.0) return out;

  const auto mom = cell_moments(k, grid);
  const bool singular = kernel_is_singular(k);
  auto& psi = out.psi;
  auto& f = out.forcing;
  if (singular) {
    psi[0] = -std::numeric_limits<double>::infinity();
    f[0] = std::numeric_limits<double>::quiet_NaN();
  } else {
    psi[0] = u * kernel_at_origin(k);
    f[0] = nonlin(psi[0]);
  }
  const double implicit = mom.m0[0] - mom.m1[0];
  const Fractional* frac = std::get_if<Fractional>(&k);

  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double kj = eval_kernel(k, grid.time(j));
    double known = 0.0;  // everything except the F_j (m0 - m1) term of the newest cell
    double predicted_f = 0.0;
    if (singular) {
      if (j == 1) {
        const double w1 = singular_cell_weight(*frac, p, grid, 1);
        psi[1] = first_cell_root(u * kj, w1, nonlin);
        f[1] = nonlin(psi[1]);
        if (!std::isfinite(psi[1]) || !std::isfinite(f[1])) throw NumericalError("non-finite Riccati value", 1);
        continue;
      }
      known = f[j - 1] * mom.m1[0];
      for (std::size_t l = 1; l + 1 < j; ++l) known += f[j - l] * (mom.m0[l] - mom.m1[l]) + f[j - l - 1] * mom.m1[l];
      known += f[1] * singular_cell_weight(*frac, p, grid, j);
    } else {
      known = f[j - 1] * mom.m1[0];
      for (std::size_t l = 1; l < j; ++l) known += f[j - l] * (mom.m0[l] - mom.m1[l]) + f[j - l - 1] * mom.m1[l];
    }
    predicted_f = f[j - 1];
    const double psi_pred = u * kj + known + predicted_f * implicit;
    const double f_pred = nonlin(std::min(psi_pred, 0.0));
    psi[j] = u * kj + known + f_pred * implicit;
    if (!std::isfinite(psi[j])) throw NumericalError("non-finite Riccati value", j);
    f[j] = nonlin(std::min(psi[j], 0.0));
  }
  return out;
}

template <class Forcing>
RiccatiPath lifted_exponential_integrator(std::span<const double> rates, std::span<const double> pairing,
                                          std::vector<double> y0, Forcing&& forcing, const TimeGrid& grid,
                                          double u) {
  const std::size_t n = rates.size();
  const double h = grid.step();
  std::vector<double> decay(n), m0(n), m1(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rates[i] * h;
    decay[i] = std::exp(-z);
    m0[i] = h * phi1(z);
    m1[i] = h * phi2(z);
  }
  auto pair = [&](const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pairing[i] * y[i];
    return s;
  };

  RiccatiPath out{grid, u, std::vector<double>(grid.size()), std::vector<double>(grid.size()), {}};
  out.y.reserve(grid.size());
  std::vector<double> y = std::move(y0), yp(n);
  double f = forcing(y);
  out.y.push_back(y);
  out.psi[0] = pair(y);
  out.forcing[0] = f;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) yp[i] = decay[i] * y[i] + f * m0[i];
    const double fp = forcing(yp);
    for (std::size_t i = 0; i < n; ++i) y[i] = decay[i] * y[i] + fp * (m0[i] - m1[i]) + f * m1[i];
    out.psi[j] = pair(y);
    const double fc = forcing(y);
    // the history carries the forcing evaluated at the corrected value
    for (std::size_t i = 0; i < n; ++i) y[i] += (fc - fp) * (m0[i] - m1[i]);
    f = fc;
    out.forcing[j] = f;
    if (!std::isfinite(out.psi[j]) || !std::isfinite(f)) throw NumericalError("non-finite Riccati value", j);
    out.y.push_back(y);
  }
  return out;
}

}  // namespace detail

/// Scalar Riccati Volterra equation by product integration.
///
/// For the singular fractional kernel, R(psi_s) blows up like s^p at the
/// origin (p = 2 alpha - 2 with diffusion, alpha - 1 without). On the first
/// cell the forcing is taken as F_1 (s/dt)^p, integrated exactly against K,
/// and psi_1 is solved implicitly so that it stays negative.
inline RiccatiPath riccati_volterra(double u, const Kernel& k, const DriverParams& drv, const TimeGrid& grid) {
  validate(drv);
  double p = 0.0;
  if (const auto* f = std::get_if<Fractional>(&k)) p = detail::forcing_singularity_power(f->alpha, drv);
  return detail::riccati_volterra_impl(u, k, [&](double v) { return nonlinearity_R(v, drv); }, grid, p);
}

/// Same scheme with an arbitrary nonlinearity (e.g. nonlinearity_pure_jump).
/// `singularity_power` is only used for singular kernels.
inline RiccatiPath riccati_volterra(double u, const Kernel& k, const std::function<double(double)>& nonlin,
                                    const TimeGrid& grid, double singularity_power) {
  return detail::riccati_volterra_impl(u, k, nonlin, grid, singularity_power);
}

/// Lifted Riccati ODE y' = -x y + R(<y, nu>) with y(0) = u.
inline RiccatiPath riccati_lifted(double u, const LiftMeasure& nu, const std::function<double(double)>& nonlin,
                                  const TimeGrid& grid) {
  require_polar(u);
  const auto rates = nu.rates();
  const auto weights = nu.weights();
  std::vector<double> y0(nu.size(), u);
  return detail::lifted_exponential_integrator(
      rates, weights, std::move(y0),
      [&](const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
        return nonlin(std::min(s, 0.0));
      },
      grid, u);
}

inline RiccatiPath riccati_lifted(double u, const LiftMeasure& nu, const DriverParams& drv, const TimeGrid& grid) {
  validate(drv);
  return riccati_lifted(u, nu, [&](double v) { return nonlinearity_R(v, drv); }, grid);
}

/// Riccati equation of the epsilon-jump building block:
///   y_i' = -x_i y_i - w <y, nu> + int (exp(<y, S*_eps nu> xi) - 1) mu(dxi)
inline RiccatiPath riccati_eps_jump(std::vector<double> y0, const LiftMeasure& nu, double w, const JumpMeasureSpec& mu,
                                    double eps, const TimeGrid& grid) {
  if (y0.size() != nu.size()) throw ShapeError("initial Riccati vector does not match the measure");
  for (double v : y0)
    if (!(v <= 0.0)) throw DomainError("initial Riccati vector must be coordinate-wise <= 0");
  if (!(w > 0.0)) throw DomainError("w must be positive");
  if (!(eps >= 0.0)) throw DomainError("eps must be nonnegative");
  validate(mu);
  const auto rates = nu.rates();
  const auto weights = nu.weights();
  std::vector<double> damped(nu.size());
  for (std::size_t i = 0; i < nu.size(); ++i) damped[i] = weights[i] * std::exp(-eps * rates[i]);
  const double u = y0.empty() ? 0.0 : y0.front();
  return detail::lifted_exponential_integrator(
      rates, weights, std::move(y0),
      [&](const std::vector<double>& y) {
        double plain = 0.0, shifted = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          plain += weights[i] * y[i];
          shifted += damped[i] * y[i];
        }
        return -w * plain + jump_laplace_exponent(mu, std::min(shifted, 0.0));
      },
      grid, u);
}

// ---------------------------------------------------------------------------
// Laplace transforms E[exp(u V_t)]

/// exp(sum_i y_i(t) lambda0_i) with y from the lifted Riccati ODE.
inline double laplace_transform_lifted(double u, const LiftState& lambda0, const LiftMeasure& nu,
                                       const std::function<double(double)>& nonlin, double t, const TimeGrid& grid) {
  require_aligned(lambda0, nu);
  require_polar(u);
  const std::size_t j = grid.index_of(t);
  if (u == 0.0 || j == 0) return std::exp(u * lambda0.total());
  const auto path = riccati_lifted(u, nu, nonlin, grid.prefix(j));
  double s = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) s += path.y.back()[i] * lambda0.masses[i];
  return std::exp(s);
}

inline double laplace_transform_lifted(double u, const LiftState& lambda0, const LiftMeasure& nu,
                                       const DriverParams& drv, double t, const TimeGrid& grid) {
  validate(drv);
  return laplace_transform_lifted(u, lambda0, nu, [&](double v) { return nonlinearity_R(v, drv); }, t, grid);
}

/// exp(u h(t) + int_0^t h(t-s) R(psi_s) ds) for an exponential-sum kernel and a
/// lift state. h(t) = sum_i lambda0_i exp(-x_i t) is itself an exponential sum,
/// so the convolution uses exact cell integrals of h against the forcing,
/// linear on each cell, matching the quadrature of the Riccati Volterra solve.
inline double laplace_transform_volterra(double u, const LiftState& lambda0, const Kernel& k,
                                         const std::function<double(double)>& nonlin, double t, const TimeGrid& grid) {
  require_polar(u);
  const auto* es = std::get_if<ExponentialSum>(&k);
  if (!es) throw DomainError("a lift state determines h only for exponential-sum kernels; pass h explicitly");
  const auto& nu = es->measure;
  require_aligned(lambda0, nu);
  const std::size_t j = grid.index_of(t);
  const auto rates = nu.rates();
  const double ht = detail::eval_exponential(rates, lambda0.masses, t);
  if (u == 0.0 || j == 0) return std::exp(u * ht);
  const auto sub = grid.prefix(j);
  const auto path = riccati_volterra(u, k, nonlin, sub, 0.0);
  const auto hm = exponential_cell_moments(rates, lambda0.masses, sub);
  return std::exp(u * ht + product_convolution(hm, path.forcing, j));
}

inline double laplace_transform_volterra(double u, const LiftState& lambda0, const Kernel& k, const DriverParams& drv,
                                         double t, const TimeGrid& grid) {
  validate(drv);
  return laplace_transform_volterra(u, lambda0, k, [&](double v) { return nonlinearity_R(v, drv); }, t, grid);
}

/// Variant with h given on the grid nodes (any kernel). The convolution is the
/// trapezoid rule; for singular kernels the first cell uses the power-law
/// profile of the forcing.
inline double laplace_transform_volterra(double u, std::span<const double> h, const Kernel& k,
                                         const DriverParams& drv, double t, const TimeGrid& grid) {
  validate(drv);
  require_polar(u);
  const std::size_t j = grid.index_of(t);
  if (h.size() < j + 1) throw ShapeError("h curve shorter than the requested time");
  if (u == 0.0 || j == 0) return std::exp(u * h[j]);
  double p = 0.0;
  if (const auto* f = std::get_if<Fractional>(&k)) p = detail::forcing_singularity_power(f->alpha, drv);
  const auto path = riccati_volterra(u, k, [&](double v) { return nonlinearity_R(v, drv); }, grid.prefix(j), p);
  const auto& f = path.forcing;
  const double dt = grid.step();
  double conv = 0.0;
  std::size_t first = 0;
  if (!std::isfinite(f[0])) {
    conv += f[1] * dt / (p + 1.0) * 0.5 * (h[j] + h[j - 1]);
    first = 1;
  }
  for (std::size_t l = first; l < j; ++l) conv += 0.5 * dt * (h[j - l] * f[l] + h[j - l - 1] * f[l + 1]);
  return std::exp(u * h[j] + conv);
}

}  // namespace volterra_lift
