#pragma once

// Path simulation of the lifted equation in mild form.
//
// Measure lift (atoms x_i, weights c_i):
//   lambda_{j+1,i} = exp(-x_i dt) (lambda_{j,i} + c_i dX_j)      (start-of-step placement)
//   lambda_{j+1,i} = exp(-x_i dt) lambda_{j,i} + c_i dX_j        (end-of-step placement)
// Forward-curve lift (space grid with the time step as spacing):
//   lambda_{j+1}(x_k) = lambda_j(x_{k+1}) + K(x_k + dt/2) dX_j
//
// All coefficients are evaluated at V+ = max(V, 0) (full truncation) and
// state-dependent jump intensities are frozen over each step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

#include "volterra_lift/driver.hpp"
#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"
#include "volterra_lift/kernel.hpp"
#include "volterra_lift/rng.hpp"

namespace volterra_lift {

enum class DampingPlacement { StartOfStep, EndOfStep };

struct SimulationOptions {
  DampingPlacement placement = DampingPlacement::StartOfStep;
  std::uint64_t path = 0;  // substream index
  bool negate_gaussians = false;
};

struct PathRecord {
  TimeGrid grid;
  std::vector<LiftState> states;      // one per node
  std::vector<double> increments;     // dX_j over [t_j, t_{j+1}]
  std::vector<std::uint32_t> jumps;   // number of jumps drawn in step j
  std::vector<double> values;         // V_j = sum_i lambda_{j,i}
};

struct ForwardCurve {
  double spacing;
  std::vector<double> values;  // lambda0(k * spacing)
};

struct CurvePath {
  TimeGrid grid;
  std::vector<double> values;      // V_j = lambda_j(0)
  std::vector<double> increments;  // dX_j
  std::vector<double> final_curve;
};

namespace detail {

inline std::uint32_t step_key(std::size_t j) { return static_cast<std::uint32_t>(j); }

inline void check_finite(double v, std::size_t step) {
  if (!std::isfinite(v)) throw NumericalError("non-finite state", step);
}

/// dX over one step of the jump-diffusion driver, coefficients at vplus.
class HybridIncrement {
 public:
  explicit HybridIncrement(const DriverParams& d)
      : d_(d), mass_(jump_mass(d.jumps)), first_(jump_first_moment(d.jumps)), sizes_(d.jumps) {}

  template <class Urbg>
  double operator()(double vplus, double dt, Urbg& g, bool negate, std::uint32_t& njumps) {
    double dx = d_.beta * vplus * dt;
    njumps = 0;
    if (vplus <= 0.0) return dx;
    if (d_.sigma > 0.0) {
      const double z = std::normal_distribution<double>(0.0, 1.0)(g);
      dx += d_.sigma * std::sqrt(vplus * dt) * (negate ? -z : z);
    }
    if (mass_ > 0.0) {
      njumps = std::poisson_distribution<std::uint32_t>(mass_ * vplus * dt)(g);
      for (std::uint32_t k = 0; k < njumps; ++k) dx += sizes_(g);
      dx -= vplus * dt * first_;
    }
    return dx;
  }

 private:
  DriverParams d_;
  double mass_;
  double first_;
  JumpSizeSampler sizes_;
};

/// dX of the pure-jump approximation with small jumps of size 1/n.
class PureJumpIncrement {
 public:
  PureJumpIncrement(const DriverParams& d, std::size_t n)
      : d_(d),
        n_(static_cast<double>(n)),
        big_mass_(jump_mass(d.jumps, 1.0 / static_cast<double>(n))),
        big_first_(jump_first_moment(d.jumps, 1.0 / static_cast<double>(n))),
        sizes_(d.jumps, 1.0 / static_cast<double>(n)) {
    if (n < 1) throw DomainError("pure-jump scheme needs n >= 1");
  }

  template <class Urbg>
  double operator()(double vplus, double dt, Urbg& g, bool, std::uint32_t& njumps) {
    njumps = 0;
    if (vplus <= 0.0) return 0.0;
    const double s2 = d_.sigma * d_.sigma;
    double dx = (d_.beta - n_ * s2 - big_first_) * vplus * dt;
    if (s2 > 0.0) {
      const auto small = std::poisson_distribution<std::uint32_t>(s2 * n_ * n_ * vplus * dt)(g);
      dx += static_cast<double>(small) / n_;
      njumps += small;
    }
    if (big_mass_ > 0.0) {
      const auto big = std::poisson_distribution<std::uint32_t>(big_mass_ * vplus * dt)(g);
      for (std::uint32_t k = 0; k < big; ++k) dx += sizes_(g);
      njumps += big;
    }
    return dx;
  }

 private:
  DriverParams d_;
  double n_;
  double big_mass_;
  double big_first_;
  JumpSizeSampler sizes_;
};

class MeasureLiftUpdate {
 public:
  MeasureLiftUpdate(const LiftMeasure& nu, double dt, DampingPlacement placement)
      : weights_(nu.weights()), decay_(nu.size()), placement_(placement) {
    for (std::size_t i = 0; i < nu.size(); ++i) decay_[i] = std::exp(-nu[i].rate * dt);
  }

  void operator()(std::vector<double>& lambda, double dx) const {
    if (placement_ == DampingPlacement::StartOfStep) {
      for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = decay_[i] * (lambda[i] + weights_[i] * dx);
    } else {
      for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = decay_[i] * lambda[i] + weights_[i] * dx;
    }
  }

 private:
  std::vector<double> weights_;
  std::vector<double> decay_;
  DampingPlacement placement_;
};

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

template <class Increment>
PathRecord run_measure_lift(const LiftMeasure& nu, const LiftState& lambda0, Increment& inc, const TimeGrid& grid,
                            std::uint64_t seed, const SimulationOptions& opt) {
  require_aligned(lambda0, nu);
  const MeasureLiftUpdate update(nu, grid.step(), opt.placement);
  PathRecord rec{grid, {}, {}, {}, {}};
  rec.states.reserve(grid.size());
  rec.values.reserve(grid.size());
  std::vector<double> lambda = lambda0.masses;
  rec.states.emplace_back(lambda);
  rec.values.push_back(sum(lambda));
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    CounterStream g(seed, opt.path, step_key(j));
    std::uint32_t nj = 0;
    const double dx = inc(std::max(rec.values.back(), 0.0), grid.step(), g, opt.negate_gaussians, nj);
    update(lambda, dx);
    const double v = sum(lambda);
    check_finite(v, j + 1);
    rec.increments.push_back(dx);
    rec.jumps.push_back(nj);
    rec.states.emplace_back(lambda);
    rec.values.push_back(v);
  }
  return rec;
}

template <class Increment>
double terminal_measure_lift(const MeasureLiftUpdate& update, const LiftState& lambda0, Increment& inc, double dt,
                             std::size_t steps, std::uint64_t seed, std::uint64_t path, bool negate) {
  std::vector<double> lambda = lambda0.masses;
  double v = sum(lambda);
  for (std::size_t j = 0; j < steps; ++j) {
    CounterStream g(seed, path, step_key(j));
    std::uint32_t nj = 0;
    update(lambda, inc(std::max(v, 0.0), dt, g, negate, nj));
    v = sum(lambda);
    check_finite(v, j + 1);
  }
  return v;
}

}  // namespace detail

/// Jump-diffusion driver, Gaussian diffusion part, compensated Poisson jumps.
inline PathRecord simulate_hybrid(const LiftMeasure& nu, const LiftState& lambda0, const DriverParams& drv,
                                  const TimeGrid& grid, std::uint64_t seed, const SimulationOptions& opt = {}) {
  validate(drv);
  detail::HybridIncrement inc(drv);
  return detail::run_measure_lift(nu, lambda0, inc, grid, seed, opt);
}

/// Diffusion replaced by jumps of size 1/n at intensity sigma^2 n^2 V with drift -n sigma^2 V;
/// m truncated to (1/n, inf) and compensated.
inline PathRecord simulate_pure_jump_n(const LiftMeasure& nu, const LiftState& lambda0, const DriverParams& drv,
                                       std::size_t n, const TimeGrid& grid, std::uint64_t seed,
                                       const SimulationOptions& opt = {}) {
  validate(drv);
  detail::PureJumpIncrement inc(drv, n);
  return detail::run_measure_lift(nu, lambda0, inc, grid, seed, opt);
}

/// Mark added to the lift by one jump of size xi in the epsilon-jump block: xi exp(-eps x_i) c_i.
inline std::vector<double> eps_jump_mark(const LiftMeasure& nu, double eps, double xi) {
  std::vector<double> mark(nu.size());
  for (std::size_t i = 0; i < nu.size(); ++i) mark[i] = xi * std::exp(-eps * nu[i].rate) * nu[i].weight;
  return mark;
}

namespace detail {

class EpsJumpUpdate {
 public:
  EpsJumpUpdate(const LiftMeasure& nu, double w, const JumpMeasureSpec& mu, double eps, double dt,
                DampingPlacement placement)
      : weights_(nu.weights()),
        decay_(nu.size()),
        mark_(eps_jump_mark(nu, eps, 1.0)),
        w_(w),
        mass_(jump_mass(mu)),
        sizes_(mu),
        dt_(dt),
        placement_(placement) {
    for (std::size_t i = 0; i < nu.size(); ++i) decay_[i] = std::exp(-nu[i].rate * dt);
  }

  template <class Urbg>
  void operator()(std::vector<double>& lambda, double vplus, Urbg& g, double& jump_sum, std::uint32_t& njumps) {
    jump_sum = 0.0;
    njumps = 0;
    if (vplus > 0.0 && mass_ > 0.0) {
      njumps = std::poisson_distribution<std::uint32_t>(mass_ * vplus * dt_)(g);
      for (std::uint32_t k = 0; k < njumps; ++k) jump_sum += sizes_(g);
    }
    const double drift = -w_ * vplus * dt_;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      const double add = weights_[i] * drift + mark_[i] * jump_sum;
      lambda[i] = placement_ == DampingPlacement::StartOfStep ? decay_[i] * (lambda[i] + add)
                                                              : decay_[i] * lambda[i] + add;
    }
  }

 private:
  std::vector<double> weights_;
  std::vector<double> decay_;
  std::vector<double> mark_;
  double w_;
  double mass_;
  JumpSizeSampler sizes_;
  double dt_;
  DampingPlacement placement_;
};

inline void validate_eps_jump(double w, const JumpMeasureSpec& mu, double eps) {
  if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("w must be positive");
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("eps must be nonnegative");
  validate(mu);
}

}  // namespace detail

/// Building block: linear drift -w nu V, uncompensated jumps of xi S*_eps nu at intensity V mu(dxi).
/// `increments` records the jump sum of each step.
inline PathRecord simulate_eps_jump(const LiftMeasure& nu, const LiftState& lambda0, double w,
                                    const JumpMeasureSpec& mu, double eps, const TimeGrid& grid, std::uint64_t seed,
                                    const SimulationOptions& opt = {}) {
  require_aligned(lambda0, nu);
  detail::validate_eps_jump(w, mu, eps);
  detail::EpsJumpUpdate update(nu, w, mu, eps, grid.step(), opt.placement);
  PathRecord rec{grid, {}, {}, {}, {}};
  std::vector<double> lambda = lambda0.masses;
  rec.states.emplace_back(lambda);
  rec.values.push_back(detail::sum(lambda));
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    CounterStream g(seed, opt.path, detail::step_key(j));
    double jump_sum = 0.0;
    std::uint32_t nj = 0;
    update(lambda, std::max(rec.values.back(), 0.0), g, jump_sum, nj);
    const double v = detail::sum(lambda);
    detail::check_finite(v, j + 1);
    rec.increments.push_back(jump_sum);
    rec.jumps.push_back(nj);
    rec.states.emplace_back(lambda);
    rec.values.push_back(v);
  }
  return rec;
}

/// Measure lift driven by a given increment sequence.
inline PathRecord propagate_measure_lift(const LiftMeasure& nu, const LiftState& lambda0,
                                         std::span<const double> increments, const TimeGrid& grid,
                                         DampingPlacement placement = DampingPlacement::StartOfStep) {
  require_aligned(lambda0, nu);
  if (increments.size() != grid.steps()) throw ShapeError("need one increment per grid step");
  const detail::MeasureLiftUpdate update(nu, grid.step(), placement);
  PathRecord rec{grid, {}, {increments.begin(), increments.end()}, std::vector<std::uint32_t>(grid.steps(), 0), {}};
  std::vector<double> lambda = lambda0.masses;
  rec.states.emplace_back(lambda);
  rec.values.push_back(detail::sum(lambda));
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    update(lambda, increments[j]);
    rec.states.emplace_back(lambda);
    rec.values.push_back(detail::sum(lambda));
  }
  return rec;
}

namespace detail {

class ForwardLiftState {
 public:
  ForwardLiftState(const Kernel& k, const ForwardCurve& curve, const TimeGrid& grid)
      : initial_(curve.values), curve_(curve.values), kmid_(curve.values.size()) {
    if (curve.values.empty()) throw ShapeError("forward curve is empty");
    if (std::abs(curve.spacing - grid.step()) > 1e-12 * grid.step())
      throw ShapeError("forward curve spacing must equal the time step");
    const double dt = grid.step();
    for (std::size_t k2 = 0; k2 < kmid_.size(); ++k2) kmid_[k2] = eval_kernel(k, (static_cast<double>(k2) + 0.5) * dt);
  }

  double value() const { return curve_.front(); }
  const std::vector<double>& curve() const { return curve_; }

  // shift by one cell, then add K(x + dt/2) dX; the tail follows the initial curve (held flat past its end)
  void advance(std::size_t next_step, double dx) {
    const std::size_t m = curve_.size();
    for (std::size_t k = 0; k + 1 < m; ++k) curve_[k] = curve_[k + 1];
    curve_[m - 1] = initial_[std::min(next_step + m - 1, m - 1)];
    for (std::size_t k = 0; k < m; ++k) curve_[k] += kmid_[k] * dx;
  }

 private:
  std::vector<double> initial_;
  std::vector<double> curve_;
  std::vector<double> kmid_;
};

}  // namespace detail

/// Forward-curve lift with the hybrid driver; V_j is the curve's left endpoint.
inline CurvePath simulate_forward_lift(const Kernel& k, const ForwardCurve& lambda0_curve, const DriverParams& drv,
                                       const TimeGrid& grid, std::uint64_t seed, const SimulationOptions& opt = {}) {
  validate(drv);
  detail::ForwardLiftState st(k, lambda0_curve, grid);
  detail::HybridIncrement inc(drv);
  CurvePath out{grid, {st.value()}, {}, {}};
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    CounterStream g(seed, opt.path, detail::step_key(j));
    std::uint32_t nj = 0;
    const double dx = inc(std::max(st.value(), 0.0), grid.step(), g, opt.negate_gaussians, nj);
    st.advance(j + 1, dx);
    detail::check_finite(st.value(), j + 1);
    out.increments.push_back(dx);
    out.values.push_back(st.value());
  }
  out.final_curve = st.curve();
  return out;
}

/// Forward-curve lift driven by a given increment sequence.
inline CurvePath propagate_forward_lift(const Kernel& k, const ForwardCurve& lambda0_curve,
                                        std::span<const double> increments, const TimeGrid& grid) {
  if (increments.size() != grid.steps()) throw ShapeError("need one increment per grid step");
  detail::ForwardLiftState st(k, lambda0_curve, grid);
  CurvePath out{grid, {st.value()}, {increments.begin(), increments.end()}, {}};
  for (std::size_t j = 0; j < grid.steps(); ++j) {
    st.advance(j + 1, increments[j]);
    out.values.push_back(st.value());
  }
  out.final_curve = st.curve();
  return out;
}

/// lambda0(x) = h(x) = sum_i lambda0_i exp(-x_i x) on `points` nodes of spacing dt.
inline ForwardCurve forward_curve_from_state(const LiftState& lambda0, const LiftMeasure& nu, double dt,
                                             std::size_t points) {
  require_aligned(lambda0, nu);
  ForwardCurve c{dt, std::vector<double>(points)};
  const auto rates = nu.rates();
  for (std::size_t k = 0; k < points; ++k)
    c.values[k] = detail::eval_exponential(rates, lambda0.masses, static_cast<double>(k) * dt);
  return c;
}

// ---------------------------------------------------------------------------
// Monte Carlo Laplace transform

struct HybridScheme {
  LiftMeasure nu;
  LiftState lambda0;
  DriverParams driver;
};

struct PureJumpScheme {
  LiftMeasure nu;
  LiftState lambda0;
  DriverParams driver;
  std::size_t n = 1;
};

struct EpsJumpScheme {
  LiftMeasure nu;
  LiftState lambda0;
  double w = 1.0;
  JumpMeasureSpec mu = NoJumps{};
  double eps = 0.0;
};

struct ForwardLiftScheme {
  Kernel kernel;
  ForwardCurve curve;
  DriverParams driver;
};

using Scheme = std::variant<HybridScheme, PureJumpScheme, EpsJumpScheme, ForwardLiftScheme>;

inline std::string scheme_name(const Scheme& s) {
  switch (s.index()) {
    case 0: return "hybrid";
    case 1: return "pure-jump";
    case 2: return "eps-jump";
    default: return "forward";
  }
}

struct McConfig {
  std::size_t paths = 10000;
  std::uint64_t seed = 42;
  bool antithetic = false;
  DampingPlacement placement = DampingPlacement::StartOfStep;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t paths = 0;
};

namespace detail {

/// V at step `steps` for one path; the scheme's samplers are built once per worker.
class TerminalSampler {
 public:
  TerminalSampler(const Scheme& s, const TimeGrid& grid, DampingPlacement placement) : scheme_(s), grid_(grid) {
    std::visit(
        [&](const auto& sc) {
          using T = std::decay_t<decltype(sc)>;
          if constexpr (std::is_same_v<T, HybridScheme>) {
            require_aligned(sc.lambda0, sc.nu);
            validate(sc.driver);
            update_.emplace(sc.nu, grid.step(), placement);
            hybrid_.emplace(sc.driver);
          } else if constexpr (std::is_same_v<T, PureJumpScheme>) {
            require_aligned(sc.lambda0, sc.nu);
            validate(sc.driver);
            update_.emplace(sc.nu, grid.step(), placement);
            pure_.emplace(sc.driver, sc.n);
          } else if constexpr (std::is_same_v<T, EpsJumpScheme>) {
            require_aligned(sc.lambda0, sc.nu);
            validate_eps_jump(sc.w, sc.mu, sc.eps);
            eps_.emplace(sc.nu, sc.w, sc.mu, sc.eps, grid.step(), placement);
          } else {
            validate(sc.driver);
            hybrid_.emplace(sc.driver);
          }
        },
        scheme_);
  }

  double operator()(std::size_t steps, std::uint64_t seed, std::uint64_t path, bool negate) {
    const double dt = grid_.step();
    switch (scheme_.index()) {
      case 0: {
        const auto& sc = std::get<HybridScheme>(scheme_);
        return terminal_measure_lift(*update_, sc.lambda0, *hybrid_, dt, steps, seed, path, negate);
      }
      case 1: {
        const auto& sc = std::get<PureJumpScheme>(scheme_);
        return terminal_measure_lift(*update_, sc.lambda0, *pure_, dt, steps, seed, path, negate);
      }
      case 2: {
        const auto& sc = std::get<EpsJumpScheme>(scheme_);
        std::vector<double> lambda = sc.lambda0.masses;
        double v = sum(lambda);
        for (std::size_t j = 0; j < steps; ++j) {
          CounterStream g(seed, path, step_key(j));
          double js = 0.0;
          std::uint32_t nj = 0;
          (*eps_)(lambda, std::max(v, 0.0), g, js, nj);
          v = sum(lambda);
          check_finite(v, j + 1);
        }
        return v;
      }
      default: {
        const auto& sc = std::get<ForwardLiftScheme>(scheme_);
        ForwardLiftState st(sc.kernel, sc.curve, grid_);
        for (std::size_t j = 0; j < steps; ++j) {
          CounterStream g(seed, path, step_key(j));
          std::uint32_t nj = 0;
          st.advance(j + 1, (*hybrid_)(std::max(st.value(), 0.0), dt, g, negate, nj));
          check_finite(st.value(), j + 1);
        }
        return st.value();
      }
    }
  }

 private:
  const Scheme& scheme_;
  TimeGrid grid_;
  std::optional<MeasureLiftUpdate> update_;
  std::optional<HybridIncrement> hybrid_;
  std::optional<PureJumpIncrement> pure_;
  std::optional<EpsJumpUpdate> eps_;
};

}  // namespace detail

/// Terminal values V_t for paths [0, paths) (antithetic: pairs share a substream).
inline std::vector<double> simulate_terminal_values(const Scheme& scheme, double t, const TimeGrid& grid,
                                                    const McConfig& mc, unsigned threads = 1) {
  if (mc.paths < 1) throw DomainError("need at least one path");
  const std::size_t steps = grid.index_of(t);
  std::vector<double> out(mc.paths);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(mc.paths)));
  auto work = [&](std::size_t begin, std::size_t end) {
    detail::TerminalSampler sampler(scheme, grid, mc.placement);
    for (std::size_t p = begin; p < end; ++p) {
      const std::uint64_t stream = mc.antithetic ? p / 2 : p;
      const bool negate = mc.antithetic && (p % 2 == 1);
      out[p] = sampler(steps, mc.seed, stream, negate);
    }
  };
  if (threads == 1) {
    work(0, mc.paths);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (mc.paths + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t b = std::min(mc.paths, w * chunk), e = std::min(mc.paths, b + chunk);
    pool.emplace_back([&, b, e, w] {
      try {
        work(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return out;
}

/// Mean of exp(u V_t) with its standard error. Results depend only on
/// (scheme, grid, u, t, mc), never on `threads`.
inline McEstimate estimate_laplace_mc(const Scheme& scheme, double u, double t, const TimeGrid& grid,
                                      const McConfig& mc, unsigned threads = 1) {
  if (!(u <= 0.0)) throw DomainError("transform argument u must be <= 0");
  if (mc.paths < 1) throw DomainError("need at least one path");
  if (u == 0.0) return {1.0, 0.0, mc.paths};
  const auto v = simulate_terminal_values(scheme, t, grid, mc, threads);
  // antithetic pairs are averaged first; a trailing unpaired path stands alone
  std::vector<double> samples;
  samples.reserve(v.size());
  if (mc.antithetic) {
    for (std::size_t p = 0; p < v.size(); p += 2)
      samples.push_back(p + 1 < v.size() ? 0.5 * (std::exp(u * v[p]) + std::exp(u * v[p + 1])) : std::exp(u * v[p]));
  } else {
    for (double x : v) samples.push_back(std::exp(u * x));
  }
  const auto n = static_cast<double>(samples.size());
  double s = 0.0;
  for (double x : samples) s += x;
  const double mean = s / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double se = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return {mean, se, mc.paths};
}

}  // namespace volterra_lift
