// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "volterra_lift.hpp"

using namespace volterra_lift;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = VOLTERRA_LIFT_CLI;
const fs::path kConfigs = VOLTERRA_LIFT_CONFIG_DIR;
const fs::path kScratch = fs::temp_directory_path() / ("volterra_lift_acceptance_" + std::to_string(::getpid()));

int failures = 0;

void report(int id, bool ok, const std::string& what) {
  std::printf("[%s] %d %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

unsigned cores() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path config_file(const std::string& name, const ModelConfig& c) {
  fs::create_directories(kScratch);
  const auto p = kScratch / (name + ".ini");
  std::ofstream(p) << serialize(c);
  return p;
}

int cli(const std::string& cmd, const fs::path& config, const fs::path& out, unsigned threads) {
  const std::string line = "\"" + kCli + "\" " + cmd + " --config \"" + config.string() + "\" --out \"" + out.string() +
                           "\" --threads " + std::to_string(threads) + " > /dev/null 2>&1";
  const int status = std::system(line.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

void resolvent_closed_form() {
  const TimeGrid grid(1e-3, 1000);
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = resolvent_second_kind(exponential_sum({{0.0, 2.0}}), 1.0, grid);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j)
    worst = std::max(worst, std::abs(r.values[j] - 2.0 * std::exp(-2.0 * grid.time(j))));
  report(1, worst < 1e-4 && secs < 1.0,
         "resolvent K=2 w=1: max error " + fmt(worst) + " (< 1e-4), " + fmt(secs) + " s (< 1 s)");
}

void resolvent_fractional() {
  const TimeGrid grid(1e-3, 1000);
  const auto r = resolvent_second_kind(fractional_kernel(0.6), 1.0, grid);
  double worst = 0.0;
  for (std::size_t j = grid.index_of(0.01); j < grid.size(); ++j) {
    const double ref = oracle::fractional_resolvent(0.6, 1.0, grid.time(j));
    worst = std::max(worst, std::abs(r.values[j] - ref) / std::abs(ref));
  }
  report(2, worst < 1e-3, "fractional resolvent alpha=0.6 w=1 dt=1e-3: max relative error on [0.01,1] " + fmt(worst) +
                              " (< 1e-3)");
}

void cone_example() {
  const LiftMeasure nu({{0.0, 1.0}, {1.0, 1.0}});
  struct Probe {
    LiftState s;
    bool in_e0, in_ew;
  };
  const std::vector<Probe> probes = {{LiftState({1.0, 1.0}), true, true},
                                     {LiftState({1.0, -1.0}), true, true},
                                     {LiftState({0.0, 1.0}), true, false},
                                     {LiftState({-1.0, 0.0}), false, false}};
  int right_w = 0, right_0 = 0;
  for (const auto& p : probes) {
    right_0 += membership_Ew(p.s, nu, 0.0) == p.in_e0;
    for (double w : {0.1, 1.0, 10.0}) right_w += membership_Ew(p.s, nu, w) == p.in_ew;
  }
  report(3, right_w == 12 && right_0 == 4,
         "cone nu=delta_0+delta_1: " + std::to_string(right_w) + "/12 verdicts for w>0, " + std::to_string(right_0) +
             "/4 for w=0");
}

void dual_consistency() {
  const TimeGrid grid(1e-3, 1000);
  const LiftMeasure cir({{0.5, 1.0}});
  const auto frac = build_measure_fractional(0.6, 20, 1.0);
  struct Case {
    LiftMeasure nu;
    LiftState lambda0;
    DriverParams drv;
  };
  const std::vector<Case> cases = {{cir, LiftState({1.0}), DriverParams{0.0, 0.4, NoJumps{}}},
                                   {frac, damped_measure(frac, 0.01), DriverParams{-0.3, 0.4, NoJumps{}}}};
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto& c : cases)
    for (double u : {-0.5, -1.0, -2.0})
      for (double t : {0.25, 1.0}) {
        const double a = laplace_transform_volterra(u, c.lambda0, kernel_from_measure(c.nu), c.drv, t, grid);
        const double b = laplace_transform_lifted(u, c.lambda0, c.nu, c.drv, t, grid);
        worst = std::max(worst, std::abs(a - b));
      }
  const double secs = seconds_since(t0);
  report(4, worst < 1e-5 && secs < 10.0,
         "Volterra vs lifted transform (CIR, 20-atom surrogate): max diff " + fmt(worst) + " (< 1e-5), " + fmt(secs) +
             " s (< 10 s)");
}

void cir_closed_form() {
  const TimeGrid grid(1e-3, 1000);
  const LiftMeasure nu({{0.5, 1.0}});
  const DriverParams drv{0.0, 0.4, NoJumps{}};
  double worst = 0.0;
  for (double u : {-0.5, -1.0, -2.0})
    for (double t : {0.25, 0.5, 1.0}) {
      const double lifted = laplace_transform_lifted(u, LiftState({1.0}), nu, drv, t, grid);
      worst = std::max(worst, std::abs(lifted - std::exp(oracle::scalar_riccati(-0.5, 0.08, u, t))));
    }
  report(5, worst < 1e-6, "single-atom lifted transform vs CIR closed form: max diff " + fmt(worst) + " (< 1e-6)");
}

void mc_vs_analytic() {
  bool ok = true;
  std::string detail;
  for (const std::string name : {"cir", "cir_jumps"}) {
    auto c = parse_model_config(slurp(kConfigs / (name + ".ini")));
    c.grid.dt = 0.002;
    c.grid.steps = 500;
    c.mc.paths = 100000;
    c.transform.u = {-1.0};
    c.transform.t = {1.0};
    const auto out = kScratch / ("c6_" + name);
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli("validate", config_file("c6_" + name, c), out, cores());
    const double secs = seconds_since(t0);
    const auto s = json::parse(slurp(out / "summary.json"));
    const auto& r = s["results"][0];
    const double z = r["z"].is_null() ? INFINITY : r["z"].get<double>();
    ok = ok && code == 0 && z < 3.0 && secs < 60.0;
    detail += " " + name + ": |diff| " + fmt(r["abs_diff"].get<double>()) + " = " + fmt(z) + " stderr, " + fmt(secs) + " s;";
  }
  report(6, ok, "hybrid MC vs analytic, 1e5 paths, 500 steps:" + detail);
}

void pure_jump_limit() {
  const auto out = kScratch / "c7";
  const int code = cli("converge", kConfigs / "pure_jump.ini", out, cores());
  std::string detail;
  bool ok = code == 0;
  if (ok) {
    const auto s = json::parse(slurp(out / "summary.json"));
    for (const auto& r : s["results"])
      detail += " n=" + std::to_string(r["n"].get<int>()) + " |diff| " + fmt(r["abs_diff"].get<double>()) + ";";
    ok = s["approaching"].get<bool>() && s["last_within_3_stderr"].get<bool>();
    const auto& last = s["results"].back();
    detail += " n=32 at " + fmt(last["abs_diff"].get<double>() / last["stderr"].get<double>()) + " stderr";
  }
  report(7, ok, "pure-jump estimates approach the analytic value:" + detail);
}

void kernel_monotonicity() {
  const Kernel exact = fractional_kernel(0.6);
  std::vector<double> errs;
  for (std::size_t n : {5u, 10u, 20u, 40u}) {
    const Kernel approx = kernel_from_measure(build_measure_fractional(0.6, n, 1.0));
    // substitution t = s^4 removes the endpoint curvature; Simpson oracle
    const double sq = oracle::simpson(
        [&](double s) {
          const double t = s * s * s * s;
          const double d = eval_kernel(exact, t) - eval_kernel(approx, t);
          return d * d * 4.0 * s * s * s;
        },
        std::pow(0.01, 0.25), 1.0, 20000);
    errs.push_back(std::sqrt(sq));
  }
  bool ok = true;
  for (std::size_t i = 1; i < errs.size(); ++i) ok = ok && errs[i] < errs[i - 1];
  report(8, ok, "L2[0.01,1] error for N=5,10,20,40: " + fmt(errs[0]) + ", " + fmt(errs[1]) + ", " + fmt(errs[2]) + ", " +
                    fmt(errs[3]) + " strictly decreasing");
}

void forward_lift_equivalence() {
  const LiftMeasure nu({{0.5, 1.0}, {2.0, 0.5}, {10.0, 0.3}});
  const LiftState s({0.3, 0.2, 0.1});
  const std::size_t finest = 1600;
  std::vector<double> fine(finest);
  CounterStream g(2024, 0, 0);
  std::normal_distribution<double> z;
  for (auto& x : fine) x = 0.5 * std::sqrt(1.0 / finest) * z(g);
  std::vector<double> c;
  for (std::size_t steps : {100u, 200u, 400u, 800u, 1600u}) {
    const TimeGrid grid(1.0 / static_cast<double>(steps), steps);
    std::vector<double> dx(steps, 0.0);
    for (std::size_t i = 0; i < finest; ++i) dx[i / (finest / steps)] += fine[i];
    const auto a = propagate_measure_lift(nu, s, dx, grid);
    const auto b =
        propagate_forward_lift(kernel_from_measure(nu), forward_curve_from_state(s, nu, grid.step(), steps + 1), dx, grid);
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) worst = std::max(worst, std::abs(a.values[j] - b.values[j]));
    c.push_back(worst / grid.step());
  }
  bool ok = true;
  std::string cs;
  for (std::size_t i = 0; i < c.size(); ++i) {
    cs += (i ? ", " : "") + fmt(c[i]);
    if (i > 0) ok = ok && c[i] / c[i - 1] > 0.5 && c[i] / c[i - 1] < 2.0;
  }
  report(9, ok, "measure vs forward lift, same dX: max|dV|/dt = " + cs + " (stable under refinement)");
}

void determinism() {
  auto c = parse_model_config(slurp(kConfigs / "cir_jumps.ini"));
  c.mc.paths = 20000;
  c.mc.antithetic = true;
  c.transform.u = {-0.5, -1.0};
  const auto cfg = config_file("c10", c);
  bool ok = true;
  std::string detail;
  for (const std::string cmd : {"validate", "converge", "simulate"}) {
    const auto a = kScratch / ("c10_" + cmd + "_1"), b = kScratch / ("c10_" + cmd + "_n");
    const int ca = cli(cmd, cfg, a, 1), cb = cli(cmd, cfg, b, std::max(3u, cores()));
    bool same = ca == cb && ca != 1;
    for (const auto& e : fs::directory_iterator(a)) {
      const auto name = e.path().filename().string();
      if (name != "manifest.json") same = same && slurp(e.path()) == slurp(b / name);
    }
    ok = ok && same;
    detail += " " + cmd + (same ? " identical;" : " differs;");
  }
  report(10, ok, "--threads 1 vs " + std::to_string(std::max(3u, cores())) + ":" + detail);
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {
      resolvent_closed_form, resolvent_fractional, cone_example,    dual_consistency,         cir_closed_form,
      mc_vs_analytic,        pure_jump_limit,      kernel_monotonicity, forward_lift_equivalence, determinism};
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, std::string("threw: ") + e.what());
    }
  }
  fs::remove_all(kScratch);
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
