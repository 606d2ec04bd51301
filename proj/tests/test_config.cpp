#include <gtest/gtest.h>

#include <string>

#include "volterra_lift/config.hpp"

using namespace volterra_lift;

namespace {

const char* kMinimal = R"(
[kernel]
variant = fractional
alpha = 0.6

[measure]
derive_n = 20

[grid]
steps = 500
)";

std::string error_key(const std::string& text) {
  try {
    parse_model_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, MinimalFillsDefaults) {
  const auto c = parse_model_config(kMinimal);
  EXPECT_EQ(c.kernel.variant, "fractional");
  EXPECT_DOUBLE_EQ(c.kernel.alpha, 0.6);
  EXPECT_EQ(c.measure.derive_n, 20u);
  EXPECT_EQ(c.mc.paths, 10000u);
  EXPECT_EQ(c.mc.seed, 42u);
  EXPECT_DOUBLE_EQ(c.grid.dt, 1.0 / 500.0);
  EXPECT_EQ(c.grid.steps, 500u);
  EXPECT_EQ(c.mc.scheme, "hybrid");
  EXPECT_EQ(c.cone.w_grid, default_w_grid());
  EXPECT_EQ(c.transform.u, std::vector<double>{-1.0});
  EXPECT_EQ(build_measure(c).size(), 20u);
  EXPECT_DOUBLE_EQ(build_grid(c).horizon(), 1.0);
}

TEST(Config, AlphaOutOfRange) {
  try {
    parse_model_config("[kernel]\nalpha = 1.2\n[grid]\nsteps = 10\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "kernel.alpha");
    EXPECT_STREQ(e.what(), "kernel.alpha must lie in (0.5, 1)");
  }
}

TEST(Config, RejectsBadInput) {
  EXPECT_EQ(error_key("[driver]\nsigma = -0.1\n[grid]\nsteps = 10\n"), "driver.sigma");
  EXPECT_EQ(error_key("[kernel]\nalpha = 0.6\n"), "grid");
  EXPECT_EQ(error_key("[grid]\ndt = 0.01\n"), "grid.steps");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\nstpes = 3\n"), "grid.stpes");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\n[kernal]\nalpha = 0.6\n"), "kernal");
  EXPECT_EQ(error_key("[grid]\nsteps = ten\n"), "grid.steps");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\n[mc]\nscheme = euler\n"), "mc.scheme");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\n[driver]\njumps = atoms\njump_sizes = 1, 2\njump_masses = 1\n"),
            "driver.jump_masses");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\n[measure]\nrates = 2, 1\nweights = 1, 1\n"), "measure.rates");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\n[cone]\nw_grid = 1, 0.5\n"), "cone.w_grid");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\n[transform]\nu = 0.5\n"), "transform.u");
  EXPECT_EQ(error_key("[grid]\nsteps = 10\nsteps = 20\n"), "");  // duplicate key: reader error
}

TEST(Config, CommentsAndHorizon) {
  const auto c = parse_model_config(
      "# leading comment\n[grid]  # trailing\ndt = 0.01\nhorizon = 2   # steps follow\n[mc]\nantithetic = true\n");
  EXPECT_EQ(c.grid.steps, 200u);
  EXPECT_TRUE(c.mc.antithetic);
  EXPECT_EQ(error_key("[grid]\ndt = 0.3\nhorizon = 1\n"), "grid.horizon");
}

TEST(Config, RoundTrip) {
  const char* text = R"(
[kernel]
variant = exponential
rates = 0.1, 2.5, 40
weights = 0.3, 0.7, 1.1
[initial]
lambda0 = 0.1, 0.2, 0.30000000000000004
flat = 0.25
[driver]
beta = -0.7
sigma = 0.3
jumps = atoms
jump_sizes = 0.5, 1
jump_masses = 2, 0.125
[grid]
dt = 0.001
steps = 1234
[mc]
paths = 77
seed = 18446744073709551615
scheme = eps-jump
antithetic = true
placement = end
[cone]
w_grid = 0.1, 1, 10
tol = 1e-12
[transform]
u = -0.5, -1
t = 0.25, 1
[eps_jump]
w = 2
eps = 0.01
jumps = exponential
jump_rate = 3
jump_intensity = 0.4
)";
  const auto c = parse_model_config(text);
  const auto again = parse_model_config(serialize(c));
  EXPECT_EQ(again, c);
  EXPECT_EQ(serialize(again), serialize(c));
  EXPECT_EQ(c.mc.seed, 18446744073709551615ull);
  EXPECT_EQ(c.initial.lambda0[2], 0.30000000000000004);
  EXPECT_EQ(parse_model_config(serialize(parse_model_config(kMinimal))), parse_model_config(kMinimal));
}

TEST(Config, KernelAndMeasureSections) {
  const Kernel ks[] = {fractional_kernel(0.7), exponential_sum({{0.5, 1.0}, {3.0, 0.25}}),
                       tabulated_kernel(TimeGrid(0.5, 2), {1.0, 0.5, 0.125})};
  for (const auto& k : ks) EXPECT_EQ(kernel_from_config(to_config(k)), k);
  const auto nu = build_measure_fractional(0.6, 10, 1.0);
  EXPECT_EQ(measure_from_config(to_config(nu)), nu);
  EXPECT_THROW(kernel_from_config("[measure]\nrates = 1\nweights = 1\n"), ConfigError);
}

TEST(Config, Builders) {
  const auto c = parse_model_config(R"(
[kernel]
variant = exponential
rates = 0, 1
weights = 1, 1
[initial]
damping = 0.5
scale = 2
[driver]
jumps = exponential
jump_rate = 2
jump_intensity = 0.5
[grid]
dt = 0.01
steps = 4
)");
  const auto nu = build_measure(c);
  ASSERT_EQ(nu.size(), 2u);
  const auto s = build_lambda0(c, nu);
  EXPECT_DOUBLE_EQ(s.masses[0], 2.0);
  EXPECT_DOUBLE_EQ(s.masses[1], 2.0 * std::exp(-0.5));
  EXPECT_EQ(build_driver(c).jumps, JumpMeasureSpec(ExponentialJumps{2.0, 0.5}));
  EXPECT_TRUE(std::holds_alternative<HybridScheme>(build_scheme(c)));
  EXPECT_TRUE(std::holds_alternative<PureJumpScheme>(build_scheme(c, 8)));
  const auto curve = build_forward_curve(c);
  ASSERT_EQ(curve.values.size(), 5u);
  EXPECT_DOUBLE_EQ(curve.values[0], s.total());

  auto bad = c;
  bad.initial.lambda0 = {1.0};
  EXPECT_THROW(build_lambda0(bad, nu), ConfigError);
  bad = c;
  bad.kernel.variant = "tabulated";
  bad.kernel.table_dt = 0.1;
  bad.kernel.values = {1.0, 0.5};
  EXPECT_THROW(build_measure(bad), ConfigError);
}
