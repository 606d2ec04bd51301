#pragma once

// Command pipelines behind the CLI. Each command writes its tables (CSV or
// JSON), a summary.json, and a manifest.json into the output directory.
//
//   kernel-approx  measure (rate,weight)  kernel_approx (t,kernel,approx,abs_error)
//   resolvent      resolvent (t,R)
//   cone-check     cone (w,member,first_negative_time,min_total_mass)
//   simulate       path (t,V,h,dX[,jumps][,lambda_0..])
//   price          transform (u,t,value_volterra,value_lifted,abs_diff)
//   validate       validate (u,t,mean,stderr,analytic,abs_diff,z)
//   converge       converge (n,mean,stderr,limit,analytic,abs_diff)
//
// Exit codes: 0 success, 1 error (error.json written), 2 validate outside 3 stderr.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "volterra_lift/cone.hpp"
#include "volterra_lift/config.hpp"
#include "volterra_lift/resolvent.hpp"
#include "volterra_lift/riccati.hpp"
#include "volterra_lift/simulate.hpp"

#ifndef VOLTERRA_LIFT_VERSION
#define VOLTERRA_LIFT_VERSION "0.1.0"
#endif

namespace volterra_lift {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitValidationFailed = 2;

struct CommandOptions {
  std::filesystem::path out = ".";
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;  // overrides mc.seed
  std::string format = "csv";         // csv | json
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"kernel-approx", "resolvent", "cone-check", "simulate",
                                                 "price",         "validate",  "converge"};
  return names;
}

namespace detail {

using json = nlohmann::ordered_json;

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

class Output {
 public:
  Output(std::filesystem::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {
    std::filesystem::create_directories(dir_);
  }

  void table(const Table& t) {
    for (const auto& r : t.rows)
      if (r.size() != t.columns.size()) throw ShapeError("table " + t.name + " has a ragged row");
    if (format_ == "json") {
      json rows = json::array();
      for (const auto& r : t.rows) {
        json row = json::array();
        for (double v : r) row.push_back(number(v));
        rows.push_back(std::move(row));
      }
      write(t.name + ".json", json{{"columns", t.columns}, {"rows", rows}}.dump(2) + "\n");
      return;
    }
    std::string body;
    for (std::size_t i = 0; i < t.columns.size(); ++i) body += (i ? "," : "") + t.columns[i];
    body += "\n";
    for (const auto& r : t.rows) {
      for (std::size_t i = 0; i < r.size(); ++i) body += (i ? "," : "") + format_real(r[i]);
      body += "\n";
    }
    write(t.name + ".csv", body);
  }

  void summary(const json& j) { write("summary.json", j.dump(2) + "\n"); }

  void write(const std::string& file, const std::string& body) {
    std::ofstream os(dir_ / file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / file).string());
    os << body;
    files_.push_back(file);
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::string format_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------

inline std::vector<double> transform_times(const ModelConfig& c) {
  return c.transform.t.empty() ? std::vector<double>{build_grid(c).horizon()} : c.transform.t;
}

/// h on the grid nodes for the configured scheme.
inline std::vector<double> h_on_grid(const ModelConfig& c, const TimeGrid& grid) {
  if (c.mc.scheme == "forward") {
    const auto curve = build_forward_curve(c);
    std::vector<double> h(grid.size());
    for (std::size_t j = 0; j < h.size(); ++j) h[j] = curve.values[std::min(j, curve.values.size() - 1)];
    return h;
  }
  const auto nu = build_measure(c);
  return h_curve(build_lambda0(c, nu), nu, grid);
}

/// E[exp(u V_t)] implied by the Riccati equations of the configured scheme.
inline double scheme_transform(const ModelConfig& c, const Scheme& scheme, double u, double t, const TimeGrid& grid) {
  if (const auto* s = std::get_if<HybridScheme>(&scheme))
    return laplace_transform_lifted(u, s->lambda0, s->nu, s->driver, t, grid);
  if (const auto* s = std::get_if<PureJumpScheme>(&scheme)) {
    const auto n = s->n;
    const auto drv = s->driver;
    return laplace_transform_lifted(u, s->lambda0, s->nu, [&](double v) { return nonlinearity_pure_jump(v, drv, n); },
                                    t, grid);
  }
  if (const auto* s = std::get_if<EpsJumpScheme>(&scheme)) {
    const std::size_t j = grid.index_of(t);
    if (j == 0 || u == 0.0) return std::exp(u * s->lambda0.total());
    const auto path = riccati_eps_jump(std::vector<double>(s->nu.size(), u), s->nu, s->w, s->mu, s->eps, grid.prefix(j));
    double e = 0.0;
    for (std::size_t i = 0; i < s->nu.size(); ++i) e += path.y.back()[i] * s->lambda0.masses[i];
    return std::exp(e);
  }
  const auto& s = std::get<ForwardLiftScheme>(scheme);
  const auto h = h_on_grid(c, grid);
  return laplace_transform_volterra(u, h, s.kernel, s.driver, t, grid);
}

/// Transform of the target model (the driver's own nonlinearity) on the lift.
inline double target_transform(const ModelConfig& c, double u, double t, const TimeGrid& grid) {
  if (c.mc.scheme == "forward") {
    const auto h = h_on_grid(c, grid);
    return laplace_transform_volterra(u, h, build_kernel(c), build_driver(c), t, grid);
  }
  const auto nu = build_measure(c);
  return laplace_transform_lifted(u, build_lambda0(c, nu), nu, build_driver(c), t, grid);
}

// ---------------------------------------------------------------------------

inline json run_kernel_approx(const ModelConfig& c, Output& out) {
  const auto grid = build_grid(c);
  const auto kernel = build_kernel(c);
  const auto nu = build_measure(c);
  Table m{"measure", {"rate", "weight"}, {}};
  for (const auto& a : nu.atoms()) m.rows.push_back({a.rate, a.weight});
  out.table(m);

  const auto approx = kernel_from_measure(nu);
  Table k{"kernel_approx", {"t", "kernel", "approx", "abs_error"}, {}};
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double t = grid.time(j), a = eval_kernel(kernel, t), b = eval_kernel(approx, t);
    k.rows.push_back({t, a, b, std::abs(a - b)});
  }
  out.table(k);

  const double hi = grid.horizon();
  const double lo = c.measure.short_time > 0.0 ? c.measure.short_time : hi / 100.0;
  return json{{"atoms", nu.size()},
              {"l2_error", number(lo < hi ? l2_distance(kernel, approx, lo, hi) : 0.0)},
              {"l2_window", {lo, hi}},
              {"kernel_variant", c.kernel.variant}};
}

inline json run_resolvent(const ModelConfig& c, Output& out) {
  const auto grid = build_grid(c);
  const auto kernel = build_kernel(c);
  const auto r = resolvent_second_kind(kernel, c.resolvent.w, grid);
  Table t{"resolvent", {"t", "R"}, {}};
  for (std::size_t j = 0; j < grid.size(); ++j) t.rows.push_back({grid.time(j), r.values[j]});
  out.table(t);
  const double residual = check_resolvent_identity(kernel, r);
  return json{{"w", r.w},
              {"identity_residual", number(residual)},
              {"tolerance", r.tolerance},
              {"origin_extrapolated", r.origin_extrapolated},
              {"min_value", *std::min_element(r.values.begin(), r.values.end())},
              {"nonnegative", resolvent_nonnegative(r, r.tolerance)}};
}

inline json run_cone_check(const ModelConfig& c, Output& out) {
  const auto nu = build_measure(c);
  const auto lambda0 = build_lambda0(c, nu);
  Table t{"cone", {"w", "member", "first_negative_time", "min_total_mass"}, {}};
  for (double w : c.cone.w_grid) {
    const auto r = membership_Ew_report(lambda0, nu, w, c.cone);
    t.rows.push_back({w, r.member ? 1.0 : 0.0, r.first_negative_time.value_or(std::nan("")), r.min_total_mass});
  }
  out.table(t);
  const auto rep = membership_E_report(lambda0, nu, c.cone);
  const double tol = c.cone.tol > 0.0 ? c.cone.tol : 1e-9;
  return json{{"member", rep.member},
              {"failing_w", optional_number(rep.failing_w)},
              {"first_negative_time", optional_number(rep.first_negative_time)},
              {"min_total_mass", number(rep.min_total_mass)},
              {"asymptotic_failure", rep.asymptotic_failure},
              {"w_grid", c.cone.w_grid},
              {"resolvent_condition", sufficient_cm_condition(kernel_from_measure(nu), c.cone.w_grid, build_grid(c), tol)}};
}

inline json run_simulate(const ModelConfig& c, Output& out) {
  const auto grid = build_grid(c);
  const auto scheme = build_scheme(c);
  const auto mc = build_mc(c);
  const SimulationOptions opt{mc.placement, 0, false};
  Table t{"path", {"t", "V", "h", "dX"}, {}};
  const auto h = h_on_grid(c, grid);
  double vmin = 0.0;
  if (const auto* fw = std::get_if<ForwardLiftScheme>(&scheme)) {
    const auto p = simulate_forward_lift(fw->kernel, fw->curve, fw->driver, grid, mc.seed, opt);
    for (std::size_t j = 0; j < grid.size(); ++j)
      t.rows.push_back({grid.time(j), p.values[j], h[j], j < grid.steps() ? p.increments[j] : 0.0});
    vmin = *std::min_element(p.values.begin(), p.values.end());
  } else {
    PathRecord p{grid, {}, {}, {}, {}};
    if (const auto* s = std::get_if<HybridScheme>(&scheme)) {
      p = simulate_hybrid(s->nu, s->lambda0, s->driver, grid, mc.seed, opt);
    } else if (const auto* s = std::get_if<PureJumpScheme>(&scheme)) {
      p = simulate_pure_jump_n(s->nu, s->lambda0, s->driver, s->n, grid, mc.seed, opt);
    } else {
      const auto& e = std::get<EpsJumpScheme>(scheme);
      p = simulate_eps_jump(e.nu, e.lambda0, e.w, e.mu, e.eps, grid, mc.seed, opt);
    }
    t.columns.push_back("jumps");
    const std::size_t dim = p.states.front().size();
    if (c.mc.coordinates)
      for (std::size_t i = 0; i < dim; ++i) t.columns.push_back("lambda_" + std::to_string(i));
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const bool last = j == grid.steps();
      std::vector<double> row = {grid.time(j), p.values[j], h[j], last ? 0.0 : p.increments[j],
                                 last ? 0.0 : static_cast<double>(p.jumps[j])};
      if (c.mc.coordinates) row.insert(row.end(), p.states[j].masses.begin(), p.states[j].masses.end());
      t.rows.push_back(std::move(row));
    }
    vmin = *std::min_element(p.values.begin(), p.values.end());
  }
  out.table(t);
  return json{{"scheme", scheme_name(scheme)}, {"seed", mc.seed}, {"steps", grid.steps()},
              {"terminal_V", t.rows.back()[1]}, {"min_V", vmin}};
}

inline json run_price(const ModelConfig& c, Output& out) {
  const auto grid = build_grid(c);
  const auto kernel = build_kernel(c);
  const auto nu = build_measure(c);
  const auto lambda0 = build_lambda0(c, nu);
  const auto drv = build_driver(c);
  const bool exact_h = std::holds_alternative<ExponentialSum>(kernel) && measure_of(kernel) == nu;
  const auto h = h_curve(lambda0, nu, grid);
  Table t{"transform", {"u", "t", "value_volterra", "value_lifted", "abs_diff"}, {}};
  json values = json::array();
  double worst = 0.0;
  for (double u : c.transform.u) {
    for (double tt : transform_times(c)) {
      const double vv = exact_h ? laplace_transform_volterra(u, lambda0, kernel, drv, tt, grid)
                                : laplace_transform_volterra(u, h, kernel, drv, tt, grid);
      const double vl = laplace_transform_lifted(u, lambda0, nu, drv, tt, grid);
      const double d = std::abs(vv - vl);
      worst = std::max(worst, d);
      t.rows.push_back({u, tt, vv, vl, d});
      values.push_back(json{{"u", u}, {"t", tt}, {"value_volterra", vv}, {"value_lifted", vl}, {"abs_diff", d}});
    }
  }
  out.table(t);
  return json{{"values", values}, {"max_abs_diff", worst}, {"kernel_variant", c.kernel.variant}, {"atoms", nu.size()}};
}

inline json run_validate(const ModelConfig& c, const CommandOptions& o, Output& out, bool& passed) {
  const auto grid = build_grid(c);
  const auto scheme = build_scheme(c);
  const auto mc = build_mc(c);
  Table t{"validate", {"u", "t", "mean", "stderr", "analytic", "abs_diff", "z"}, {}};
  json rows = json::array();
  passed = true;
  for (double u : c.transform.u) {
    for (double tt : transform_times(c)) {
      const auto est = estimate_laplace_mc(scheme, u, tt, grid, mc, o.threads);
      const double analytic = scheme_transform(c, scheme, u, tt, grid);
      const double d = std::abs(est.mean - analytic);
      const double z = est.std_error > 0.0 ? d / est.std_error : (d == 0.0 ? 0.0 : INFINITY);
      const bool ok = d <= 3.0 * est.std_error;
      passed = passed && ok;
      t.rows.push_back({u, tt, est.mean, est.std_error, analytic, d, z});
      rows.push_back(json{{"u", u},           {"t", tt},    {"mean", est.mean},   {"stderr", est.std_error},
                          {"paths", est.paths}, {"analytic", analytic}, {"abs_diff", d}, {"z", number(z)},
                          {"within_3_stderr", ok}});
    }
  }
  out.table(t);
  return json{{"scheme", scheme_name(scheme)}, {"seed", mc.seed}, {"paths", mc.paths},
              {"antithetic", mc.antithetic}, {"passed", passed}, {"results", rows}};
}

inline json run_converge(const ModelConfig& c, const CommandOptions& o, Output& out) {
  const auto grid = build_grid(c);
  const auto mc = build_mc(c);
  const double u = c.transform.u.front();
  const double tt = transform_times(c).front();
  const double analytic = target_transform(c, u, tt, grid);
  Table t{"converge", {"n", "mean", "stderr", "limit", "analytic", "abs_diff"}, {}};
  json rows = json::array();
  for (double nd : c.converge.n) {
    const auto n = static_cast<std::size_t>(nd);
    const auto scheme = build_scheme(c, n);
    const auto est = estimate_laplace_mc(scheme, u, tt, grid, mc, o.threads);
    const double limit = scheme_transform(c, scheme, u, tt, grid);
    const double d = std::abs(est.mean - analytic);
    t.rows.push_back({nd, est.mean, est.std_error, limit, analytic, d});
    rows.push_back(json{{"n", n}, {"mean", est.mean}, {"stderr", est.std_error}, {"limit", limit}, {"abs_diff", d}});
  }
  out.table(t);
  bool approaching = true;
  for (std::size_t i = 1; i < t.rows.size(); ++i) approaching = approaching && t.rows[i][5] <= t.rows[i - 1][5];
  const auto& last = t.rows.back();
  return json{{"u", u},
              {"t", tt},
              {"analytic", analytic},
              {"seed", mc.seed},
              {"paths", mc.paths},
              {"approaching", approaching},
              {"last_within_3_stderr", last[5] <= 3.0 * last[2]},
              {"results", rows}};
}

inline json error_json(const std::string& kind, const std::string& message, const std::string& key = "") {
  json j{{"error", kind}, {"message", message}};
  if (!key.empty()) j["key"] = key;
  return j;
}

}  // namespace detail

/// Runs one command and writes its artifacts into opt.out; returns the exit code.
inline int run_command(const std::string& cmd, ModelConfig cfg, const CommandOptions& opt) {
  using detail::json;
  const auto start = std::chrono::steady_clock::now();
  if (opt.seed) cfg.mc.seed = *opt.seed;
  int code = kExitOk;
  std::optional<json> error;
  std::vector<std::string> files;

  std::optional<detail::Output> out;
  try {
    out.emplace(opt.out, opt.format);
  } catch (const std::exception&) {
    return kExitError;  // nowhere to write
  }
  try {
    if (opt.format != "csv" && opt.format != "json") throw ConfigError("format", "--format must be csv or json");
    json summary;
    if (cmd == "kernel-approx") {
      summary = detail::run_kernel_approx(cfg, *out);
    } else if (cmd == "resolvent") {
      summary = detail::run_resolvent(cfg, *out);
    } else if (cmd == "cone-check") {
      summary = detail::run_cone_check(cfg, *out);
    } else if (cmd == "simulate") {
      summary = detail::run_simulate(cfg, *out);
    } else if (cmd == "price") {
      summary = detail::run_price(cfg, *out);
    } else if (cmd == "validate") {
      bool passed = true;
      summary = detail::run_validate(cfg, opt, *out, passed);
      if (!passed) code = kExitValidationFailed;
    } else if (cmd == "converge") {
      summary = detail::run_converge(cfg, opt, *out);
    } else {
      throw ConfigError("command", "unknown command '" + cmd + "'");
    }
    out->summary(summary);
  } catch (const ConfigError& e) {
    error = detail::error_json("config", e.what(), e.key());
  } catch (const DomainError& e) {
    error = detail::error_json("domain", e.what());
  } catch (const ShapeError& e) {
    error = detail::error_json("shape", e.what());
  } catch (const RangeError& e) {
    error = detail::error_json("range", e.what());
  } catch (const NumericalError& e) {
    error = detail::error_json("numerical", e.what());
  } catch (const std::exception& e) {
    error = detail::error_json("internal", e.what());
  }
  if (error) {
    code = kExitError;
    (*error)["command"] = cmd;
    out->write("error.json", error->dump(2) + "\n");
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest{{"command", cmd},
                {"config_hash", "fnv1a64:" + detail::hex64(detail::fnv1a(serialize(cfg)))},
                {"seed", cfg.mc.seed},
                {"version", VOLTERRA_LIFT_VERSION},
                {"compiler", __VERSION__},
                {"threads", opt.threads},
                {"format", opt.format},
                {"exit_code", code},
                {"files", out->files()},
                {"wall_time_seconds", wall}};
  try {
    out->write("manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception&) {
    return kExitError;
  }
  return code;
}

}  // namespace volterra_lift
