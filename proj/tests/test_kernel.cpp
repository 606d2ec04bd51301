#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "volterra_lift/kernel.hpp"

using namespace volterra_lift;

namespace {

// L2 distance on [lo, hi] by composite Simpson in t (independent of l2_distance).
double l2_error_oracle(const Kernel& exact, const Kernel& approx, double lo, double hi) {
  const double s = oracle::simpson(
      [&](double t) {
        const double d = eval_kernel(exact, t) - eval_kernel(approx, t);
        return d * d;
      },
      lo, hi, 200000);
  return std::sqrt(s);
}

}  // namespace

TEST(Kernel, ConstantExponentialSum) {
  const Kernel k = exponential_sum({{0.0, 1.0}});
  EXPECT_DOUBLE_EQ(eval_kernel(k, 0.7), 1.0);
  EXPECT_DOUBLE_EQ(eval_kernel(k, 0.0), 1.0);
}

TEST(Kernel, FractionalValues) {
  EXPECT_DOUBLE_EQ(eval_kernel(fractional_kernel(1.0), 0.5), 1.0);
  const double expected = std::pow(0.25, -0.4) / oracle::gamma(0.6);
  EXPECT_NEAR(eval_kernel(fractional_kernel(0.6), 0.25), expected, 1e-13);
  EXPECT_NEAR(expected, 1.1692, 1e-4);
}

TEST(Kernel, DomainAndRangeErrors) {
  EXPECT_THROW(eval_kernel(fractional_kernel(0.6), 0.0), DomainError);
  EXPECT_THROW(eval_kernel(fractional_kernel(0.6), -1.0), DomainError);
  EXPECT_THROW(fractional_kernel(0.4), DomainError);
  EXPECT_THROW(fractional_kernel(1.2), DomainError);
  const Kernel tab = tabulated_kernel(TimeGrid(0.5, 2), {1.0, 0.5, 0.0});
  EXPECT_DOUBLE_EQ(eval_kernel(tab, 0.25), 0.75);
  EXPECT_DOUBLE_EQ(eval_kernel(tab, 1.0), 0.0);
  EXPECT_THROW(eval_kernel(tab, 1.5), RangeError);
  EXPECT_THROW(tabulated_kernel(TimeGrid(0.5, 2), {1.0}), ShapeError);
}

TEST(Kernel, CanonicalizationMergesAndSorts) {
  const LiftMeasure nu({{2.0, 1.0}, {0.5, 0.25}, {2.0 * (1 + 1e-14), 0.5}, {0.0, 1.0}});
  ASSERT_EQ(nu.size(), 3u);
  EXPECT_EQ(nu[0].rate, 0.0);
  EXPECT_EQ(nu[1].rate, 0.5);
  EXPECT_DOUBLE_EQ(nu[2].weight, 1.5);
  EXPECT_TRUE(nu.completely_monotone());
  EXPECT_FALSE(LiftMeasure({{0.0, 1.0}, {1.0, -0.5}}).completely_monotone());
  EXPECT_THROW(LiftMeasure({{-1.0, 1.0}}), DomainError);
  EXPECT_THROW(LiftMeasure({{1.0, NAN}}), DomainError);
}

TEST(Kernel, MeasureRoundTrip) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> rate(0.0, 10.0), weight(-1.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Atom> atoms;
    for (int i = 0; i < 1 + trial % 6; ++i) atoms.push_back({rate(gen), weight(gen)});
    const Kernel k = exponential_sum(atoms);
    const LiftMeasure& nu = measure_of(k);
    EXPECT_EQ(measure_of(kernel_from_measure(nu)), nu);
    EXPECT_EQ(LiftMeasure(nu.atoms()), nu);
  }
  EXPECT_THROW(measure_of(fractional_kernel(0.6)), DomainError);
}

TEST(Kernel, CompletelyMonotoneDividedDifferences) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> rate(0.0, 5.0), weight(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Atom> atoms;
    for (int i = 0; i < 4; ++i) atoms.push_back({rate(gen), weight(gen)});
    const Kernel k = exponential_sum(atoms);
    const double h = 0.05;
    for (int j = 0; j + 2 < 60; ++j) {
      const double k0 = eval_kernel(k, j * h), k1 = eval_kernel(k, (j + 1) * h), k2 = eval_kernel(k, (j + 2) * h);
      EXPECT_GE(k0, 0.0);
      EXPECT_LE(k1 - k0, 1e-15);
      EXPECT_GE(k2 - 2 * k1 + k0, -1e-15);
    }
  }
}

TEST(Kernel, FractionalMeasureStructure) {
  const auto nu = build_measure_fractional(0.6, 20, 1.0);
  ASSERT_EQ(nu.size(), 20u);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    EXPECT_GT(nu[i].rate, 0.0);
    EXPECT_GT(nu[i].weight, 0.0);
    if (i > 0) {
      EXPECT_GT(nu[i].rate, nu[i - 1].rate);
    }
  }
  const auto one = build_measure_fractional(0.6, 1, 1.0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_GT(one[0].rate, 0.0);
  EXPECT_GT(one[0].weight, 0.0);
  EXPECT_THROW(build_measure_fractional(0.5, 10, 1.0), DomainError);
  EXPECT_THROW(build_measure_fractional(1.0, 10, 1.0), DomainError);
  EXPECT_THROW(build_measure_fractional(0.6, 0, 1.0), DomainError);
}

TEST(Kernel, FractionalApproximationImprovesWithAtoms) {
  const Kernel exact = fractional_kernel(0.6);
  double previous = INFINITY;
  for (std::size_t n : {5u, 10u, 20u, 40u}) {
    const Kernel approx = kernel_from_measure(build_measure_fractional(0.6, n, 1.0));
    const double err = l2_error_oracle(exact, approx, 0.01, 1.0);
    EXPECT_LT(err, previous) << "N = " << n;
    // library quadrature agrees with the Simpson oracle
    EXPECT_NEAR(l2_distance(exact, approx, 0.01, 1.0), err, 1e-6 + 1e-4 * err);
    previous = err;
  }
}

TEST(Kernel, AlphaOneLimitIsDeltaAtZero) {
  const Kernel k = kernel_from_measure(LiftMeasure({{0.0, 1.0}}));
  for (double t : {0.1, 0.5, 3.0}) EXPECT_DOUBLE_EQ(eval_kernel(k, t), eval_kernel(fractional_kernel(1.0), t));
}

TEST(Kernel, HCurve) {
  const TimeGrid grid(0.5, 4);
  const LiftMeasure single({{2.0, 1.0}});
  const auto h = h_curve(LiftState({3.0}), single, grid);
  EXPECT_DOUBLE_EQ(h[0], 3.0);
  EXPECT_NEAR(h[2], 3.0 * std::exp(-2.0), 1e-15);
  for (double v : h_curve(LiftState({0.0}), single, grid)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(h_curve(LiftState({1.0, 2.0}), single, grid), ShapeError);
}

TEST(Kernel, HCurveDecreasingConvex) {
  const LiftMeasure nu({{0.5, 1.0}, {2.0, 1.0}});
  const TimeGrid grid(0.01, 300);
  const auto h = h_curve(LiftState({1.0, 1.0}), nu, grid);
  for (std::size_t j = 0; j + 2 < h.size(); ++j) {
    // analytic: h' = -0.5 e^{-0.5t} - 2 e^{-2t} < 0, h'' = 0.25 e^{-0.5t} + 4 e^{-2t} > 0
    EXPECT_LT(h[j + 1] - h[j], 0.0);
    EXPECT_GT(h[j + 2] - 2 * h[j + 1] + h[j], 0.0);
  }
}

TEST(Kernel, HCurveStartsAtTotalMass) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const LiftMeasure nu({{0.1, 1.0}, {1.0, 1.0}, {7.0, 0.3}});
    const LiftState s({d(gen), d(gen), d(gen)});
    EXPECT_NEAR(h_curve(s, nu, TimeGrid(0.1, 3))[0], s.total(), 4e-16);
  }
}

TEST(Kernel, L2NormSquared) {
  EXPECT_DOUBLE_EQ(l2_norm_sq(exponential_sum({{0.0, 1.0}}), 2.0), 2.0);
  EXPECT_NEAR(l2_norm_sq(exponential_sum({{1.0, 1.0}}), 1.0), (1.0 - std::exp(-2.0)) / 2.0, 1e-15);
  const double g = oracle::gamma(0.75);
  EXPECT_NEAR(l2_norm_sq(fractional_kernel(0.75), 1.0), 1.0 / (0.5 * g * g), 1e-13);
  // mixed exponential sum against numerical integration
  const Kernel k = exponential_sum({{0.0, 0.5}, {1.5, -0.3}, {4.0, 2.0}});
  const double num = oracle::simpson([&](double t) { return std::pow(eval_kernel(k, t), 2); }, 0.0, 2.0, 20000);
  EXPECT_NEAR(l2_norm_sq(k, 2.0), num, 1e-10);
  const Kernel tab = tabulated_kernel(TimeGrid(0.25, 4), {2.0, 1.0, 0.5, 0.5, 0.0});
  const double tnum = oracle::simpson([&](double t) { return std::pow(eval_kernel(tab, t), 2); }, 0.0, 1.0, 40000);
  EXPECT_NEAR(l2_norm_sq(tab, 1.0), tnum, 1e-9);
}

TEST(Kernel, SquaredKernelFiniteOnGrid) {
  for (const Kernel& k : {fractional_kernel(0.55), fractional_kernel(0.9), exponential_sum({{3.0, 1.0}})})
    for (double T : {0.1, 1.0, 10.0}) EXPECT_TRUE(std::isfinite(l2_norm_sq(k, T)));
}

TEST(Kernel, CellMomentsMatchQuadrature) {
  const TimeGrid grid(0.1, 10);
  const std::vector<Kernel> kernels = {exponential_sum({{0.0, 1.0}, {3.0, 0.5}, {40.0, 2.0}}),
                                       tabulated_kernel(TimeGrid(0.04, 30), std::vector<double>(31, 0.0)),
                                       fractional_kernel(0.8)};
  for (const auto& k : kernels) {
    const auto m = cell_moments(k, grid);
    for (std::size_t l = 1; l < grid.steps(); ++l) {
      const double a = grid.time(l), b = grid.time(l + 1);
      const double m0 = oracle::simpson([&](double s) { return eval_kernel(k, s); }, a, b, 2000);
      const double m1 = oracle::simpson([&](double s) { return (s - a) / 0.1 * eval_kernel(k, s); }, a, b, 2000);
      EXPECT_NEAR(m.m0[l], m0, 1e-11);
      EXPECT_NEAR(m.m1[l], m1, 1e-11);
    }
  }
  // first fractional cell against the closed-form power integrals
  const auto mf = cell_moments(fractional_kernel(0.6), grid);
  const double g = oracle::gamma(0.6);
  EXPECT_NEAR(mf.m0[0], std::pow(0.1, 0.6) / (0.6 * g), 1e-14);
  EXPECT_NEAR(mf.m1[0], std::pow(0.1, 0.6) / (1.6 * g), 1e-14);
}

TEST(Kernel, TabulatedCellMomentsOnCoarserTable) {
  std::vector<double> v;
  for (int j = 0; j <= 8; ++j) v.push_back(std::cos(0.3 * j) + 0.1 * j);
  const Kernel tab = tabulated_kernel(TimeGrid(0.125, 8), v);
  const TimeGrid grid(0.05, 20);
  const auto m = cell_moments(tab, grid);
  for (std::size_t l = 0; l < grid.steps(); ++l) {
    const double a = grid.time(l), b = grid.time(l + 1);
    EXPECT_NEAR(m.m0[l], oracle::simpson([&](double s) { return eval_kernel(tab, s); }, a, b, 4000), 1e-9);
  }
}

TEST(Kernel, SelfConvolution) {
  const TimeGrid grid(0.05, 20);
  const Kernel k = exponential_sum({{0.0, 1.0}, {2.0, 0.5}, {2.0 + 1e-9, 0.25}, {5.0, -0.3}});
  const auto kk = self_convolution(k, grid);
  for (std::size_t j = 1; j < grid.size(); j += 4) {
    const double t = grid.time(j);
    const double num =
        oracle::simpson([&](double s) { return eval_kernel(k, s) * eval_kernel(k, t - s); }, 0.0, t, 4000);
    EXPECT_NEAR(kk[j], num, 1e-10);
  }
  const auto kf = self_convolution(fractional_kernel(0.7), grid);
  EXPECT_NEAR(kf[20], std::pow(1.0, 0.4) / oracle::gamma(1.4), 1e-14);
}
