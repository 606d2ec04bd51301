#pragma once

// Driver X of the lifted equation:
//   dX_t = beta V_t dt + sigma sqrt(V_t) dB_t + int xi (mu^X(dxi, dt) - V_t m(dxi) dt)
// with a Levy measure m on (0, inf) of finite mass and second moment.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "volterra_lift/errors.hpp"

namespace volterra_lift {

struct NoJumps {
  bool operator==(const NoJumps&) const = default;
};

/// sum_k mass_k delta_{size_k}
struct FiniteJumps {
  std::vector<double> sizes;
  std::vector<double> masses;
  bool operator==(const FiniteJumps&) const = default;
};

/// intensity * rate * exp(-rate xi) dxi: total mass `intensity`, Exp(rate) sizes.
struct ExponentialJumps {
  double rate;
  double intensity;
  bool operator==(const ExponentialJumps&) const = default;
};

using JumpMeasureSpec = std::variant<NoJumps, FiniteJumps, ExponentialJumps>;

inline void validate(const JumpMeasureSpec& m) {
  if (const auto* f = std::get_if<FiniteJumps>(&m)) {
    if (f->sizes.size() != f->masses.size()) throw ShapeError("jump sizes and masses differ in length");
    for (double s : f->sizes)
      if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("jump sizes must be positive and finite");
    for (double q : f->masses)
      if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("jump masses must be positive and finite");
  } else if (const auto* e = std::get_if<ExponentialJumps>(&m)) {
    if (!(e->rate > 0.0) || !std::isfinite(e->rate)) throw DomainError("exponential jump rate must be positive");
    if (!(e->intensity > 0.0) || !std::isfinite(e->intensity))
      throw DomainError("exponential jump intensity must be positive");
  }
}

/// m(xi > threshold); threshold = 0 gives the total mass.
inline double jump_mass(const JumpMeasureSpec& m, double threshold = 0.0) {
  return std::visit(
      [threshold](const auto& mm) -> double {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, FiniteJumps>) {
          double s = 0.0;
          for (std::size_t k = 0; k < mm.sizes.size(); ++k)
            if (mm.sizes[k] > threshold) s += mm.masses[k];
          return s;
        } else {
          return mm.intensity * std::exp(-mm.rate * threshold);
        }
      },
      m);
}

/// int_{xi > threshold} xi m(dxi)
inline double jump_first_moment(const JumpMeasureSpec& m, double threshold = 0.0) {
  return std::visit(
      [threshold](const auto& mm) -> double {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, FiniteJumps>) {
          double s = 0.0;
          for (std::size_t k = 0; k < mm.sizes.size(); ++k)
            if (mm.sizes[k] > threshold) s += mm.masses[k] * mm.sizes[k];
          return s;
        } else {
          return mm.intensity * std::exp(-mm.rate * threshold) * (threshold + 1.0 / mm.rate);
        }
      },
      m);
}

inline double jump_second_moment(const JumpMeasureSpec& m) {
  return std::visit(
      [](const auto& mm) -> double {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, FiniteJumps>) {
          double s = 0.0;
          for (std::size_t k = 0; k < mm.sizes.size(); ++k) s += mm.masses[k] * mm.sizes[k] * mm.sizes[k];
          return s;
        } else {
          return 2.0 * mm.intensity / (mm.rate * mm.rate);
        }
      },
      m);
}

/// int (exp(z xi) - 1) m(dxi) for z <= 0.
inline double jump_laplace_exponent(const JumpMeasureSpec& m, double z) {
  return std::visit(
      [z](const auto& mm) -> double {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, FiniteJumps>) {
          double s = 0.0;
          for (std::size_t k = 0; k < mm.sizes.size(); ++k) s += mm.masses[k] * std::expm1(z * mm.sizes[k]);
          return s;
        } else {
          return mm.intensity * z / (mm.rate - z);
        }
      },
      m);
}

/// int_{xi > threshold} (exp(z xi) - 1 - z xi) m(dxi) for z <= 0.
inline double jump_compensated_exponent(const JumpMeasureSpec& m, double z, double threshold = 0.0) {
  return std::visit(
      [z, threshold](const auto& mm) -> double {
        using T = std::decay_t<decltype(mm)>;
        if constexpr (std::is_same_v<T, NoJumps>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, FiniteJumps>) {
          double s = 0.0;
          for (std::size_t k = 0; k < mm.sizes.size(); ++k)
            if (mm.sizes[k] > threshold) s += mm.masses[k] * (std::expm1(z * mm.sizes[k]) - z * mm.sizes[k]);
          return s;
        } else {
          const double th = mm.rate;
          if (threshold == 0.0) return mm.intensity * z * z / (th * (th - z));
          return mm.intensity * std::exp(-th * threshold) *
                 (th * std::exp(z * threshold) / (th - z) - 1.0 - z * (threshold + 1.0 / th));
        }
      },
      m);
}

/// Draws jump sizes from m restricted to (threshold, inf), normalized.
class JumpSizeSampler {
 public:
  explicit JumpSizeSampler(const JumpMeasureSpec& m, double threshold = 0.0) : threshold_(threshold) {
    if (const auto* f = std::get_if<FiniteJumps>(&m)) {
      std::vector<double> w;
      for (std::size_t k = 0; k < f->sizes.size(); ++k)
        if (f->sizes[k] > threshold) {
          sizes_.push_back(f->sizes[k]);
          w.push_back(f->masses[k]);
        }
      if (!w.empty()) atoms_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    } else if (const auto* e = std::get_if<ExponentialJumps>(&m)) {
      exponential_ = true;
      rate_ = e->rate;
    }
  }

  template <class Urbg>
  double operator()(Urbg& g) {
    if (exponential_) return threshold_ + std::exponential_distribution<double>(rate_)(g);  // memoryless tail
    return sizes_[atoms_(g)];
  }

 private:
  double threshold_;
  bool exponential_ = false;
  double rate_ = 1.0;
  std::vector<double> sizes_;
  std::discrete_distribution<std::size_t> atoms_;
};

struct DriverParams {
  double beta = 0.0;   // drift per unit V
  double sigma = 0.0;  // diffusion loading, >= 0
  JumpMeasureSpec jumps = NoJumps{};

  bool operator==(const DriverParams&) const = default;
};

inline void validate(const DriverParams& d) {
  if (!std::isfinite(d.beta)) throw DomainError("driver beta must be finite");
  if (!(d.sigma >= 0.0) || !std::isfinite(d.sigma)) throw DomainError("driver sigma must be finite and nonnegative");
  validate(d.jumps);
}

inline std::string jump_family_name(const JumpMeasureSpec& m) {
  if (std::holds_alternative<FiniteJumps>(m)) return "atoms";
  if (std::holds_alternative<ExponentialJumps>(m)) return "exponential";
  return "none";
}

}  // namespace volterra_lift
