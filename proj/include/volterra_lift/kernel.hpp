#pragma once

// Volterra kernels, their discrete lift measures, and the deterministic
// curves derived from them.
//
// A kernel K is either
//   - an exponential sum  K(t) = sum_i c_i exp(-x_i t)  (Laplace transform of
//     the discrete measure nu = sum_i c_i delta_{x_i}),
//   - the fractional kernel  K(t) = t^(alpha-1) / Gamma(alpha),
//   - or a table on a uniform grid, linearly interpolated.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"

namespace volterra_lift {

struct Atom {
  double rate;    // x_i >= 0, per unit time
  double weight;  // c_i
  bool operator==(const Atom&) const = default;
};

/// Discrete measure nu = sum_i c_i delta_{x_i}, kept sorted by rate with
/// near-duplicate rates merged. Also the coordinate frame of lift states.
class LiftMeasure {
 public:
  static constexpr double kMergeTolerance = 1e-12;

  LiftMeasure() = default;
  explicit LiftMeasure(std::vector<Atom> atoms) : atoms_(canonicalize(std::move(atoms))) {}

  std::size_t size() const noexcept { return atoms_.size(); }
  bool empty() const noexcept { return atoms_.empty(); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }

  std::vector<double> rates() const {
    std::vector<double> r(atoms_.size());
    std::transform(atoms_.begin(), atoms_.end(), r.begin(), [](const Atom& a) { return a.rate; });
    return r;
  }
  std::vector<double> weights() const {
    std::vector<double> w(atoms_.size());
    std::transform(atoms_.begin(), atoms_.end(), w.begin(), [](const Atom& a) { return a.weight; });
    return w;
  }

  /// All weights nonnegative: the kernel is completely monotone.
  bool completely_monotone() const noexcept {
    return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.weight >= 0.0; });
  }

  /// Total mass nu(R_+) = K(0).
  double mass() const noexcept {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.weight;
    return s;
  }

  /// Smallest strictly positive rate, or 0 when every rate is 0.
  double smallest_positive_rate() const noexcept {
    for (const auto& a : atoms_)
      if (a.rate > 0.0) return a.rate;
    return 0.0;
  }

  bool operator==(const LiftMeasure&) const = default;

  static std::vector<Atom> canonicalize(std::vector<Atom> atoms) {
    for (const auto& a : atoms) {
      if (!std::isfinite(a.rate) || a.rate < 0.0) throw DomainError("lift measure rates must be finite and nonnegative");
      if (!std::isfinite(a.weight)) throw DomainError("lift measure weights must be finite");
    }
    std::stable_sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.rate < b.rate; });
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) {
      if (!out.empty()) {
        auto& last = out.back();
        const double scale = std::max(last.rate, a.rate);
        if (a.rate - last.rate <= kMergeTolerance * scale) {
          last.weight += a.weight;
          continue;
        }
      }
      out.push_back(a);
    }
    return out;
  }

 private:
  std::vector<Atom> atoms_;
};

/// Masses lambda_i at the atoms of a lift measure. V = sum_i lambda_i.
struct LiftState {
  std::vector<double> masses;

  LiftState() = default;
  explicit LiftState(std::vector<double> m) : masses(std::move(m)) {}

  std::size_t size() const noexcept { return masses.size(); }
  double total() const noexcept {
    double s = 0.0;
    for (double m : masses) s += m;
    return s;
  }
  bool operator==(const LiftState&) const = default;
};

inline void require_aligned(const LiftState& state, const LiftMeasure& measure) {
  if (state.size() != measure.size())
    throw ShapeError("lift state has " + std::to_string(state.size()) + " coordinates but the measure has " +
                     std::to_string(measure.size()) + " atoms");
}

/// The damped measure S*_u nu, coordinates c_i exp(-x_i u).
inline LiftState damped_measure(const LiftMeasure& nu, double u) {
  std::vector<double> m(nu.size());
  for (std::size_t i = 0; i < nu.size(); ++i) m[i] = nu[i].weight * std::exp(-nu[i].rate * u);
  return LiftState(std::move(m));
}

// ---------------------------------------------------------------------------
// Kernel variants

struct ExponentialSum {
  LiftMeasure measure;
  bool operator==(const ExponentialSum&) const = default;
};

struct Fractional {
  double alpha;
  bool operator==(const Fractional&) const = default;
};

struct Tabulated {
  TimeGrid grid;
  std::vector<double> values;  // K(t_j), one per grid node
  bool operator==(const Tabulated&) const = default;
};

using Kernel = std::variant<ExponentialSum, Fractional, Tabulated>;

inline Kernel kernel_from_measure(LiftMeasure nu) { return ExponentialSum{std::move(nu)}; }

inline Kernel exponential_sum(std::vector<Atom> atoms) { return ExponentialSum{LiftMeasure(std::move(atoms))}; }

/// K(t) = t^(alpha-1)/Gamma(alpha), alpha in (1/2, 1]. alpha = 1 is the constant kernel.
inline Kernel fractional_kernel(double alpha) {
  if (!(alpha > 0.5 && alpha <= 1.0)) throw DomainError("fractional kernel alpha must lie in (0.5, 1]");
  return Fractional{alpha};
}

inline Kernel tabulated_kernel(TimeGrid grid, std::vector<double> values) {
  if (values.size() != grid.size()) throw ShapeError("tabulated kernel needs one value per grid node");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("tabulated kernel values must be finite");
  return Tabulated{grid, std::move(values)};
}

/// The measure behind an exponential-sum kernel (round trip with kernel_from_measure).
inline const LiftMeasure& measure_of(const Kernel& k) {
  if (const auto* e = std::get_if<ExponentialSum>(&k)) return e->measure;
  throw DomainError("kernel is not an exponential sum");
}

namespace detail {

// (1 - e^{-z}) / z
inline double phi1(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  return -std::expm1(-z) / z;
}

// int_0^1 theta e^{-z theta} dtheta = (1 - e^{-z}(1 + z)) / z^2
inline double phi2(double z) {
  if (std::abs(z) < 1e-2) {
    const double z2 = z * z;
    return 0.5 - z / 3.0 + z2 / 8.0 - z2 * z / 30.0 + z2 * z2 / 144.0 - z2 * z2 * z / 840.0;
  }
  return (-std::expm1(-z) - z * std::exp(-z)) / (z * z);
}

inline double eval_exponential(std::span<const double> rates, std::span<const double> weights, double t) {
  double s = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) s += weights[i] * std::exp(-rates[i] * t);
  return s;
}

inline double eval_table(const Tabulated& tab, double t) {
  const double h = tab.grid.step();
  const double r = t / h;
  const auto last = static_cast<double>(tab.grid.steps());
  if (r > last * (1.0 + 1e-12) + 1e-12) throw RangeError("t beyond the range of the tabulated kernel");
  if (r >= last) return tab.values.back();
  const auto j = static_cast<std::size_t>(std::floor(r));
  const double theta = r - static_cast<double>(j);
  return (1.0 - theta) * tab.values[j] + theta * tab.values[j + 1];
}

}  // namespace detail

/// K(t). Fractional kernels require t > 0 (unless alpha == 1); tables raise RangeError past their horizon.
inline double eval_kernel(const Kernel& k, double t) {
  if (!(t >= 0.0)) throw DomainError("kernel evaluated at negative time");
  return std::visit(
      [t](const auto& kk) -> double {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialSum>) {
          double s = 0.0;
          for (const auto& a : kk.measure.atoms()) s += a.weight * std::exp(-a.rate * t);
          return s;
        } else if constexpr (std::is_same_v<T, Fractional>) {
          if (kk.alpha == 1.0) return 1.0;
          if (t <= 0.0) throw DomainError("fractional kernel is singular at t = 0");
          return std::pow(t, kk.alpha - 1.0) / std::tgamma(kk.alpha);
        } else {
          return detail::eval_table(kk, t);
        }
      },
      k);
}

/// K(0), which is +inf for a singular fractional kernel.
inline double kernel_at_origin(const Kernel& k) {
  if (const auto* f = std::get_if<Fractional>(&k); f && f->alpha < 1.0) return std::numeric_limits<double>::infinity();
  return eval_kernel(k, 0.0);
}

inline bool kernel_is_singular(const Kernel& k) { return !std::isfinite(kernel_at_origin(k)); }

// ---------------------------------------------------------------------------
// Fractional kernel quadrature

/// Constants of the geometric rate grid used by build_measure_fractional.
struct FractionalQuadrature {
  /// Lowest interior edge as a multiple of 1/T.
  double low_edge = 0.1;
  /// Highest edge as a multiple of sqrt(N)/short_time.
  double high_edge = 10.0;
};

/// N-atom exponential-sum approximation of t^(alpha-1)/Gamma(alpha).
///
/// The density x^(-alpha) / (Gamma(alpha) Gamma(1-alpha)) of nu is split into
/// N cells: [0, e_1], [e_1, e_2], ..., [e_{N-1}, e_N] with e_1..e_N geometric
/// between low_edge/T and high_edge*sqrt(N)/short_time. Each cell becomes one
/// atom carrying the cell mass, placed at the cell's mean rate. Both integrals
/// are closed-form power integrals. short_time defaults to T/100 and is the
/// lower end of the window [short_time, T] on which the approximation is meant
/// to be accurate.
inline LiftMeasure build_measure_fractional(double alpha, std::size_t n, double horizon, double short_time = 0.0,
                                            FractionalQuadrature q = {}) {
  if (!(alpha > 0.5 && alpha < 1.0)) throw DomainError("alpha must lie in (0.5, 1)");
  if (n < 1) throw DomainError("number of atoms must be at least 1");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (short_time <= 0.0) short_time = horizon / 100.0;
  if (!(short_time < horizon)) throw DomainError("short_time must be below the horizon");

  const double lo = q.low_edge / horizon;
  const double hi = std::max(q.high_edge * std::sqrt(static_cast<double>(n)) / short_time, 10.0 * lo);
  std::vector<double> edges(n + 1, 0.0);
  if (n == 1) {
    edges[1] = std::sqrt(lo * hi);
  } else {
    for (std::size_t k = 1; k <= n; ++k)
      edges[k] = lo * std::pow(hi / lo, static_cast<double>(k - 1) / static_cast<double>(n - 1));
  }

  const double density = 1.0 / (std::tgamma(alpha) * std::tgamma(1.0 - alpha));
  const double p0 = 1.0 - alpha;
  const double p1 = 2.0 - alpha;
  std::vector<Atom> atoms;
  atoms.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double a = edges[k - 1], b = edges[k];
    const double mass = density * (std::pow(b, p0) - std::pow(a, p0)) / p0;
    const double first = density * (std::pow(b, p1) - std::pow(a, p1)) / p1;
    atoms.push_back({first / mass, mass});
  }
  return LiftMeasure(std::move(atoms));
}

// ---------------------------------------------------------------------------
// Derived curves

/// h(t_j) = sum_i lambda0_i exp(-x_i t_j).
inline std::vector<double> h_curve(const LiftState& lambda0, const LiftMeasure& measure, const TimeGrid& grid) {
  require_aligned(lambda0, measure);
  std::vector<double> h(grid.size(), 0.0);
  const auto rates = measure.rates();
  h[0] = lambda0.total();
  for (std::size_t j = 1; j < grid.size(); ++j) h[j] = detail::eval_exponential(rates, lambda0.masses, grid.time(j));
  return h;
}

/// int_0^T K(s)^2 ds, closed form for exponential sums and fractional kernels,
/// exact piecewise integration of the linear interpolant for tables.
inline double l2_norm_sq(const Kernel& k, double horizon) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  return std::visit(
      [horizon](const auto& kk) -> double {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialSum>) {
          const auto& at = kk.measure.atoms();
          double s = 0.0;
          for (const auto& a : at)
            for (const auto& b : at) {
              const double r = a.rate + b.rate;
              s += a.weight * b.weight * horizon * detail::phi1(r * horizon);
            }
          return s;
        } else if constexpr (std::is_same_v<T, Fractional>) {
          const double g = std::tgamma(kk.alpha);
          return std::pow(horizon, 2.0 * kk.alpha - 1.0) / ((2.0 * kk.alpha - 1.0) * g * g);
        } else {
          if (horizon > kk.grid.horizon() * (1.0 + 1e-12)) throw RangeError("horizon beyond the tabulated kernel");
          const double h = kk.grid.step();
          double s = 0.0;
          for (std::size_t j = 0; j < kk.grid.steps(); ++j) {
            const double a = kk.grid.time(j);
            if (a >= horizon) break;
            const double b = std::min(a + h, horizon);
            const double fa = kk.values[j];
            const double fb = detail::eval_table(kk, b);
            const double fm = detail::eval_table(kk, 0.5 * (a + b));
            s += (b - a) / 6.0 * (fa * fa + 4.0 * fm * fm + fb * fb);
          }
          return s;
        }
      },
      k);
}

/// L2 distance between two kernels on [lo, hi], by Gauss-Legendre panels in log time.
inline double l2_distance(const Kernel& a, const Kernel& b, double lo, double hi, std::size_t panels = 64) {
  if (!(lo > 0.0 && hi > lo)) throw DomainError("need 0 < lo < hi");
  using boost::math::quadrature::gauss;
  const double l0 = std::log(lo), l1 = std::log(hi);
  const double width = (l1 - l0) / static_cast<double>(panels);
  double s = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double pa = l0 + width * static_cast<double>(p);
    s += gauss<double, 20>::integrate(
        [&](double v) {
          const double t = std::exp(v);
          const double d = eval_kernel(a, t) - eval_kernel(b, t);
          return d * d * t;
        },
        pa, pa + width);
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Product-integration weights

/// Exact cell integrals of K on a uniform grid:
///   m0[l] = int_{t_l}^{t_{l+1}} K(s) ds
///   m1[l] = int_{t_l}^{t_{l+1}} (s - t_l)/dt K(s) ds
/// With f linear on each cell, int_0^{t_j} K(s) f(t_j - s) ds equals
///   sum_l f_{j-l} (m0[l] - m1[l]) + f_{j-l-1} m1[l].
struct CellMoments {
  std::vector<double> m0;
  std::vector<double> m1;

  std::size_t size() const noexcept { return m0.size(); }
};

namespace detail {

inline void exponential_moments(std::span<const double> rates, std::span<const double> weights, const TimeGrid& grid,
                                CellMoments& out) {
  const double h = grid.step();
  const std::size_t n = grid.steps();
  out.m0.assign(n, 0.0);
  out.m1.assign(n, 0.0);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double z = rates[i] * h;
    const double c0 = weights[i] * h * phi1(z);
    const double c1 = weights[i] * h * phi2(z);
    const double decay = std::exp(-z);
    double damp = 1.0;
    for (std::size_t l = 0; l < n; ++l) {
      if (damp == 0.0) break;
      out.m0[l] += c0 * damp;
      out.m1[l] += c1 * damp;
      damp *= decay;
    }
  }
}

}  // namespace detail

/// Cell moments of an exponential sum given as raw (rate, weight) columns.
inline CellMoments exponential_cell_moments(std::span<const double> rates, std::span<const double> weights,
                                            const TimeGrid& grid) {
  CellMoments out;
  detail::exponential_moments(rates, weights, grid, out);
  return out;
}

inline CellMoments cell_moments(const Kernel& k, const TimeGrid& grid) {
  CellMoments out;
  const double h = grid.step();
  const std::size_t n = grid.steps();
  std::visit(
      [&](const auto& kk) {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialSum>) {
          const auto r = kk.measure.rates();
          const auto w = kk.measure.weights();
          detail::exponential_moments(r, w, grid, out);
        } else if constexpr (std::is_same_v<T, Fractional>) {
          out.m0.resize(n);
          out.m1.resize(n);
          const double a = kk.alpha;
          const double g0 = std::tgamma(a + 1.0);
          const double g = std::tgamma(a);
          for (std::size_t l = 0; l < n; ++l) {
            const double lo = grid.time(l), hi = grid.time(l + 1);
            const double pa = std::pow(lo, a), pb = std::pow(hi, a);
            out.m0[l] = (pb - pa) / g0;
            const double first = (pb * hi - pa * lo) / (a + 1.0);
            out.m1[l] = (first - lo * (pb - pa) / a) / (h * g);
          }
        } else {
          if (grid.horizon() > kk.grid.horizon() * (1.0 + 1e-12)) throw RangeError("grid beyond the tabulated kernel");
          out.m0.resize(n);
          out.m1.resize(n);
          const double th = kk.grid.step();
          for (std::size_t l = 0; l < n; ++l) {
            const double lo = grid.time(l), hi = grid.time(l + 1);
            // split at table nodes; integrands are at most quadratic per piece
            double s0 = 0.0, s1 = 0.0, a = lo;
            while (a < hi) {
              double b = (std::floor(a / th + 1e-9) + 1.0) * th;
              if (b > hi || hi - b < 1e-12 * h) b = hi;
              const double m = 0.5 * (a + b);
              const double fa = detail::eval_table(kk, a), fm = detail::eval_table(kk, m), fb = detail::eval_table(kk, b);
              const double w = (b - a) / 6.0;
              s0 += w * (fa + 4.0 * fm + fb);
              s1 += w * ((a - lo) * fa + 4.0 * (m - lo) * fm + (b - lo) * fb) / h;
              a = b;
            }
            out.m0[l] = s0;
            out.m1[l] = s1;
          }
        }
      },
      k);
  for (std::size_t l = 0; l < n; ++l)
    if (!std::isfinite(out.m0[l]) || !std::isfinite(out.m1[l]))
      throw NumericalError("non-finite kernel cell integral", l);
  return out;
}

/// (K * f)(t_j) for f given on the nodes, piecewise linear between them.
inline double product_convolution(const CellMoments& w, std::span<const double> f, std::size_t j) {
  double s = 0.0;
  for (std::size_t l = 0; l < j; ++l) s += f[j - l] * (w.m0[l] - w.m1[l]) + f[j - l - 1] * w.m1[l];
  return s;
}

/// (K * K)(t_j) on the grid nodes.
inline std::vector<double> self_convolution(const Kernel& k, const TimeGrid& grid) {
  std::vector<double> out(grid.size(), 0.0);
  std::visit(
      [&](const auto& kk) {
        using T = std::decay_t<decltype(kk)>;
        if constexpr (std::is_same_v<T, ExponentialSum>) {
          const auto& at = kk.measure.atoms();
          for (std::size_t j = 1; j < grid.size(); ++j) {
            const double t = grid.time(j);
            double s = 0.0;
            for (std::size_t i = 0; i < at.size(); ++i)
              for (std::size_t m = 0; m < at.size(); ++m) {
                // int_0^t e^{-x_i (t-s)} e^{-x_m s} ds with the slower rate factored out
                const double lo = std::min(at[i].rate, at[m].rate);
                const double hi = std::max(at[i].rate, at[m].rate);
                s += at[i].weight * at[m].weight * t * std::exp(-lo * t) * detail::phi1((hi - lo) * t);
              }
            out[j] = s;
          }
        } else if constexpr (std::is_same_v<T, Fractional>) {
          const double g = std::tgamma(2.0 * kk.alpha);
          for (std::size_t j = 1; j < grid.size(); ++j) out[j] = std::pow(grid.time(j), 2.0 * kk.alpha - 1.0) / g;
        } else {
          const auto w = cell_moments(k, grid);
          std::vector<double> f(grid.size());
          for (std::size_t j = 0; j < grid.size(); ++j) f[j] = detail::eval_table(kk, grid.time(j));
          for (std::size_t j = 1; j < grid.size(); ++j) out[j] = product_convolution(w, f, j);
        }
      },
      k);
  return out;
}

}  // namespace volterra_lift
