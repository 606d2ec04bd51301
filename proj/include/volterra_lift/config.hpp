#pragma once

// Model configuration: flat sectioned `key = value` text with '#' comments.
//
//   [kernel]     variant = fractional | exponential | tabulated
//                alpha (0.6), rates, weights, table_dt, values
//   [measure]    rates, weights (explicit atoms) or derive_n (20), derive_horizon (grid horizon), short_time (horizon/100)
//   [initial]    lambda0 (list) or damping (0.01) and scale (1): lambda0 = scale * S*_damping nu
//                curve (list) or flat: initial curve of the forward lift
//   [driver]     beta (0), sigma (0), jumps = none | atoms | exponential,
//                jump_sizes, jump_masses, jump_rate, jump_intensity
//   [grid]       dt (0.002), steps or horizon (one is required)
//   [mc]         paths (10000), seed (42), scheme = hybrid | pure-jump | eps-jump | forward, n (32),
//                antithetic (false), placement = start | end, coordinates (false)
//   [cone]       w_grid (11 log-spaced points in [1e-2, 1e3]), horizon, step, tol (0: automatic)
//   [transform]  u (-1), t (grid horizon)
//   [resolvent]  w (1)
//   [converge]   n (2, 8, 32)
//   [eps_jump]   w (1), eps (0), jumps, jump_sizes, jump_masses, jump_rate, jump_intensity
//
// Lists are comma separated. Unknown sections or keys are errors.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "volterra_lift/cone.hpp"
#include "volterra_lift/driver.hpp"
#include "volterra_lift/errors.hpp"
#include "volterra_lift/grid.hpp"
#include "volterra_lift/kernel.hpp"
#include "volterra_lift/simulate.hpp"

namespace volterra_lift {

struct JumpConfig {
  std::string family = "none";
  std::vector<double> sizes;
  std::vector<double> masses;
  double rate = 0.0;
  double intensity = 0.0;
  bool operator==(const JumpConfig&) const = default;
};

struct KernelSection {
  std::string variant = "fractional";
  double alpha = 0.6;
  std::vector<double> rates, weights;
  double table_dt = 0.0;
  std::vector<double> values;
  bool operator==(const KernelSection&) const = default;
};

struct MeasureSection {
  std::vector<double> rates, weights;
  std::size_t derive_n = 20;
  double derive_horizon = 0.0;
  double short_time = 0.0;
  bool operator==(const MeasureSection&) const = default;
};

struct InitialSection {
  std::vector<double> lambda0;
  double damping = 0.01;
  double scale = 1.0;
  std::vector<double> curve;
  std::optional<double> flat;
  bool operator==(const InitialSection&) const = default;
};

struct DriverSection {
  double beta = 0.0;
  double sigma = 0.0;
  JumpConfig jumps;
  bool operator==(const DriverSection&) const = default;
};

struct GridSection {
  double dt = 0.002;
  std::size_t steps = 0;
  bool operator==(const GridSection&) const = default;
};

struct McSection {
  std::size_t paths = 10000;
  std::uint64_t seed = 42;
  std::string scheme = "hybrid";
  std::size_t n = 32;
  bool antithetic = false;
  std::string placement = "start";
  bool coordinates = false;
  bool operator==(const McSection&) const = default;
};

struct TransformSection {
  std::vector<double> u = {-1.0};
  std::vector<double> t;
  bool operator==(const TransformSection&) const = default;
};

struct ResolventSection {
  double w = 1.0;
  bool operator==(const ResolventSection&) const = default;
};

struct ConvergeSection {
  std::vector<double> n = {2.0, 8.0, 32.0};
  bool operator==(const ConvergeSection&) const = default;
};

struct EpsJumpSection {
  double w = 1.0;
  double eps = 0.0;
  JumpConfig jumps;
  bool operator==(const EpsJumpSection&) const = default;
};

struct ModelConfig {
  KernelSection kernel;
  MeasureSection measure;
  InitialSection initial;
  DriverSection driver;
  GridSection grid;
  McSection mc;
  ConeCheckConfig cone;
  TransformSection transform;
  ResolventSection resolvent;
  ConvergeSection converge;
  EpsJumpSection eps_jump;

  bool operator==(const ModelConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key, key + " must be a number, got '" + t + "'");
  if (!std::isfinite(v)) throw ConfigError(key, key + " must be finite");
  return v;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key, key + " must be a nonnegative integer, got '" + t + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key, key + " must be true or false");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, item));
  return out;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_real(v[i]);
  return s;
}

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

inline void read_jumps(JumpConfig& j, const std::string& section, const std::string& key, const std::string& value) {
  const std::string path = section + "." + key;
  if (key == "jumps") j.family = trim(value);
  else if (key == "jump_sizes") j.sizes = parse_list(path, value);
  else if (key == "jump_masses") j.masses = parse_list(path, value);
  else if (key == "jump_rate") j.rate = parse_real(path, value);
  else if (key == "jump_intensity") j.intensity = parse_real(path, value);
  else throw ConfigError(path, "unknown key " + path);
}

inline void validate_jumps(const JumpConfig& j, const std::string& section) {
  const std::string p = section + ".";
  if (j.family == "none") return;
  if (j.family == "atoms") {
    require(!j.sizes.empty(), p + "jump_sizes", p + "jump_sizes must list at least one size");
    require(j.sizes.size() == j.masses.size(), p + "jump_masses", p + "jump_masses must match " + p + "jump_sizes");
    for (double s : j.sizes) require(s > 0.0, p + "jump_sizes", p + "jump_sizes must be positive");
    for (double m : j.masses) require(m > 0.0, p + "jump_masses", p + "jump_masses must be positive");
    return;
  }
  if (j.family == "exponential") {
    require(j.rate > 0.0, p + "jump_rate", p + "jump_rate must be positive");
    require(j.intensity > 0.0, p + "jump_intensity", p + "jump_intensity must be positive");
    return;
  }
  throw ConfigError(p + "jumps", p + "jumps must be none, atoms or exponential");
}

inline void write_jumps(std::ostream& os, const JumpConfig& j) {
  os << "jumps = " << j.family << "\n";
  os << "jump_sizes = " << format_list(j.sizes) << "\n";
  os << "jump_masses = " << format_list(j.masses) << "\n";
  os << "jump_rate = " << format_real(j.rate) << "\n";
  os << "jump_intensity = " << format_real(j.intensity) << "\n";
}

}  // namespace detail

namespace detail {

inline void validate_kernel(const ModelConfig& c) {
  const auto& k = c.kernel;
  if (k.variant == "fractional") {
    require(k.alpha > 0.5 && k.alpha < 1.0, "kernel.alpha", "kernel.alpha must lie in (0.5, 1)");
  } else if (k.variant == "exponential") {
    require(!k.rates.empty(), "kernel.rates", "kernel.rates must list at least one rate");
    require(k.rates.size() == k.weights.size(), "kernel.weights", "kernel.weights must match kernel.rates");
    for (std::size_t i = 0; i < k.rates.size(); ++i)
      require(k.rates[i] >= 0.0 && (i == 0 || k.rates[i] > k.rates[i - 1]), "kernel.rates",
              "kernel.rates must be nonnegative and strictly increasing");
  } else if (k.variant == "tabulated") {
    require(k.table_dt > 0.0, "kernel.table_dt", "kernel.table_dt must be positive");
    require(k.values.size() >= 2, "kernel.values", "kernel.values needs at least two entries");
  } else {
    throw ConfigError("kernel.variant", "kernel.variant must be fractional, exponential or tabulated");
  }
}

inline void validate_measure(const ModelConfig& c) {
  const auto& m = c.measure;
  require(m.rates.size() == m.weights.size(), "measure.weights", "measure.weights must match measure.rates");
  for (std::size_t i = 0; i < m.rates.size(); ++i)
    require(m.rates[i] >= 0.0 && (i == 0 || m.rates[i] > m.rates[i - 1]), "measure.rates",
            "measure.rates must be nonnegative and strictly increasing");
  require(m.derive_n >= 1, "measure.derive_n", "measure.derive_n must be at least 1");
  require(m.derive_horizon >= 0.0, "measure.derive_horizon", "measure.derive_horizon must be nonnegative");
  require(m.short_time >= 0.0, "measure.short_time", "measure.short_time must be nonnegative");
}

}  // namespace detail

inline void validate(const ModelConfig& c) {
  using detail::require;
  detail::validate_kernel(c);
  detail::validate_measure(c);

  require(c.initial.damping >= 0.0, "initial.damping", "initial.damping must be nonnegative");
  require(c.initial.scale >= 0.0, "initial.scale", "initial.scale must be nonnegative");

  require(c.driver.sigma >= 0.0, "driver.sigma", "driver.sigma must be nonnegative");
  detail::validate_jumps(c.driver.jumps, "driver");

  require(c.grid.dt > 0.0, "grid.dt", "grid.dt must be positive");
  require(c.grid.steps >= 1, "grid.steps", "grid.steps must be at least 1");

  require(c.mc.paths >= 1, "mc.paths", "mc.paths must be at least 1");
  require(c.mc.n >= 1, "mc.n", "mc.n must be at least 1");
  require(c.mc.scheme == "hybrid" || c.mc.scheme == "pure-jump" || c.mc.scheme == "eps-jump" || c.mc.scheme == "forward",
          "mc.scheme", "mc.scheme must be hybrid, pure-jump, eps-jump or forward");
  require(c.mc.placement == "start" || c.mc.placement == "end", "mc.placement", "mc.placement must be start or end");

  validate(c.cone);
  for (double u : c.transform.u) require(u <= 0.0, "transform.u", "transform.u must be <= 0");
  for (double t : c.transform.t) require(t > 0.0, "transform.t", "transform.t must be positive");
  require(c.resolvent.w >= 0.0, "resolvent.w", "resolvent.w must be nonnegative");
  for (double n : c.converge.n)
    require(n >= 1.0 && n == std::floor(n), "converge.n", "converge.n must list positive integers");
  require(c.eps_jump.w > 0.0, "eps_jump.w", "eps_jump.w must be positive");
  require(c.eps_jump.eps >= 0.0, "eps_jump.eps", "eps_jump.eps must be nonnegative");
  detail::validate_jumps(c.eps_jump.jumps, "eps_jump");
}

namespace detail {

inline boost::property_tree::ptree read_sections(const std::string& text) {
  // '#' starts a comment; the INI reader only knows ';'
  std::stringstream cleaned;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    cleaned << (hash == std::string::npos ? line : line.substr(0, hash)) << "\n";
  }
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(cleaned, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("", "malformed config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [name, body] : tree)
    if (body.empty() && !body.data().empty()) throw ConfigError(name, "key '" + name + "' outside any section");
  return tree;
}

struct GridKeys {
  bool present = false;
  std::optional<std::size_t> steps;
  std::optional<double> horizon;
};

inline void apply_key(ModelConfig& c, GridKeys& g, const std::string& section, const std::string& key,
                      const std::string& v) {
  const std::string path = section + "." + key;
  auto unknown = [&] { throw ConfigError(path, "unknown key " + path); };
  if (section == "kernel") {
    if (key == "variant") c.kernel.variant = trim(v);
    else if (key == "alpha") c.kernel.alpha = parse_real(path, v);
    else if (key == "rates") c.kernel.rates = parse_list(path, v);
    else if (key == "weights") c.kernel.weights = parse_list(path, v);
    else if (key == "table_dt") c.kernel.table_dt = parse_real(path, v);
    else if (key == "values") c.kernel.values = parse_list(path, v);
    else unknown();
  } else if (section == "measure") {
    if (key == "rates") c.measure.rates = parse_list(path, v);
    else if (key == "weights") c.measure.weights = parse_list(path, v);
    else if (key == "derive_n") c.measure.derive_n = parse_count(path, v);
    else if (key == "derive_horizon") c.measure.derive_horizon = parse_real(path, v);
    else if (key == "short_time") c.measure.short_time = parse_real(path, v);
    else unknown();
  } else if (section == "initial") {
    if (key == "lambda0") c.initial.lambda0 = parse_list(path, v);
    else if (key == "damping") c.initial.damping = parse_real(path, v);
    else if (key == "scale") c.initial.scale = parse_real(path, v);
    else if (key == "curve") c.initial.curve = parse_list(path, v);
    else if (key == "flat") c.initial.flat = trim(v).empty() ? std::nullopt : std::optional(parse_real(path, v));
    else unknown();
  } else if (section == "driver") {
    if (key == "beta") c.driver.beta = parse_real(path, v);
    else if (key == "sigma") c.driver.sigma = parse_real(path, v);
    else read_jumps(c.driver.jumps, section, key, v);
  } else if (section == "grid") {
    g.present = true;
    if (key == "dt") c.grid.dt = parse_real(path, v);
    else if (key == "steps") g.steps = parse_count(path, v);
    else if (key == "horizon") g.horizon = parse_real(path, v);
    else unknown();
  } else if (section == "mc") {
    if (key == "paths") c.mc.paths = parse_count(path, v);
    else if (key == "seed") c.mc.seed = parse_count(path, v);
    else if (key == "scheme") c.mc.scheme = trim(v);
    else if (key == "n") c.mc.n = parse_count(path, v);
    else if (key == "antithetic") c.mc.antithetic = parse_bool(path, v);
    else if (key == "placement") c.mc.placement = trim(v);
    else if (key == "coordinates") c.mc.coordinates = parse_bool(path, v);
    else unknown();
  } else if (section == "cone") {
    if (key == "w_grid") c.cone.w_grid = parse_list(path, v);
    else if (key == "horizon") c.cone.horizon = parse_real(path, v);
    else if (key == "step") c.cone.step = parse_real(path, v);
    else if (key == "tol") c.cone.tol = parse_real(path, v);
    else unknown();
  } else if (section == "transform") {
    if (key == "u") c.transform.u = parse_list(path, v);
    else if (key == "t") c.transform.t = parse_list(path, v);
    else unknown();
  } else if (section == "resolvent") {
    if (key == "w") c.resolvent.w = parse_real(path, v);
    else unknown();
  } else if (section == "converge") {
    if (key == "n") c.converge.n = parse_list(path, v);
    else unknown();
  } else if (section == "eps_jump") {
    if (key == "w") c.eps_jump.w = parse_real(path, v);
    else if (key == "eps") c.eps_jump.eps = parse_real(path, v);
    else read_jumps(c.eps_jump.jumps, section, key, v);
  } else {
    throw ConfigError(section, "unknown section [" + section + "]");
  }
}

inline void resolve_grid(ModelConfig& c, const GridKeys& g) {
  if (!g.present) throw ConfigError("grid", "missing [grid] section: set grid.steps or grid.horizon");
  if (g.steps && g.horizon) throw ConfigError("grid.horizon", "set either grid.steps or grid.horizon, not both");
  if (g.steps) {
    c.grid.steps = *g.steps;
    return;
  }
  if (!g.horizon) throw ConfigError("grid.steps", "missing grid: set grid.steps or grid.horizon");
  require(*g.horizon > 0.0 && c.grid.dt > 0.0, "grid.horizon", "grid.horizon must be positive");
  const double r = *g.horizon / c.grid.dt;
  require(std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r), "grid.horizon",
          "grid.horizon must be a multiple of grid.dt");
  c.grid.steps = static_cast<std::size_t>(std::round(r));
}

}  // namespace detail

inline ModelConfig parse_model_config(const std::string& text) {
  const auto tree = detail::read_sections(text);
  ModelConfig c;
  detail::GridKeys g;
  for (const auto& [section, body] : tree)
    for (const auto& [key, node] : body) detail::apply_key(c, g, section, key, node.data());
  detail::resolve_grid(c, g);
  validate(c);
  return c;
}

/// Canonical text form; parse_model_config(serialize(c)) == c.
inline std::string serialize(const ModelConfig& c) {
  using detail::format_list;
  using detail::format_real;
  std::ostringstream os;
  os << "[kernel]\nvariant = " << c.kernel.variant << "\nalpha = " << format_real(c.kernel.alpha)
     << "\nrates = " << format_list(c.kernel.rates) << "\nweights = " << format_list(c.kernel.weights)
     << "\ntable_dt = " << format_real(c.kernel.table_dt) << "\nvalues = " << format_list(c.kernel.values) << "\n\n";
  os << "[measure]\nrates = " << format_list(c.measure.rates) << "\nweights = " << format_list(c.measure.weights)
     << "\nderive_n = " << c.measure.derive_n << "\nderive_horizon = " << format_real(c.measure.derive_horizon)
     << "\nshort_time = " << format_real(c.measure.short_time) << "\n\n";
  os << "[initial]\nlambda0 = " << format_list(c.initial.lambda0) << "\ndamping = " << format_real(c.initial.damping)
     << "\nscale = " << format_real(c.initial.scale) << "\ncurve = " << format_list(c.initial.curve)
     << "\nflat = " << (c.initial.flat ? format_real(*c.initial.flat) : "") << "\n\n";
  os << "[driver]\nbeta = " << format_real(c.driver.beta) << "\nsigma = " << format_real(c.driver.sigma) << "\n";
  detail::write_jumps(os, c.driver.jumps);
  os << "\n[grid]\ndt = " << format_real(c.grid.dt) << "\nsteps = " << c.grid.steps << "\n\n";
  os << "[mc]\npaths = " << c.mc.paths << "\nseed = " << c.mc.seed << "\nscheme = " << c.mc.scheme
     << "\nn = " << c.mc.n << "\nantithetic = " << (c.mc.antithetic ? "true" : "false")
     << "\nplacement = " << c.mc.placement << "\ncoordinates = " << (c.mc.coordinates ? "true" : "false") << "\n\n";
  os << "[cone]\nw_grid = " << format_list(c.cone.w_grid) << "\nhorizon = " << format_real(c.cone.horizon)
     << "\nstep = " << format_real(c.cone.step) << "\ntol = " << format_real(c.cone.tol) << "\n\n";
  os << "[transform]\nu = " << format_list(c.transform.u) << "\nt = " << format_list(c.transform.t) << "\n\n";
  os << "[resolvent]\nw = " << format_real(c.resolvent.w) << "\n\n";
  os << "[converge]\nn = " << format_list(c.converge.n) << "\n\n";
  os << "[eps_jump]\nw = " << format_real(c.eps_jump.w) << "\neps = " << format_real(c.eps_jump.eps) << "\n";
  detail::write_jumps(os, c.eps_jump.jumps);
  return os.str();
}

// ---------------------------------------------------------------------------
// Model objects built from a validated config

inline TimeGrid build_grid(const ModelConfig& c) { return TimeGrid(c.grid.dt, c.grid.steps); }

inline Kernel build_kernel(const ModelConfig& c) {
  if (c.kernel.variant == "fractional") return fractional_kernel(c.kernel.alpha);
  if (c.kernel.variant == "exponential") {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < c.kernel.rates.size(); ++i) atoms.push_back({c.kernel.rates[i], c.kernel.weights[i]});
    return exponential_sum(std::move(atoms));
  }
  const auto n = c.kernel.values.size() - 1;
  return tabulated_kernel(TimeGrid(c.kernel.table_dt, n), c.kernel.values);
}

/// Explicit measure atoms, else the kernel's own atoms, else the fractional quadrature.
inline LiftMeasure build_measure(const ModelConfig& c) {
  if (!c.measure.rates.empty()) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < c.measure.rates.size(); ++i) atoms.push_back({c.measure.rates[i], c.measure.weights[i]});
    return LiftMeasure(std::move(atoms));
  }
  if (c.kernel.variant == "exponential") return measure_of(build_kernel(c));
  if (c.kernel.variant == "fractional") {
    const double horizon = c.measure.derive_horizon > 0.0 ? c.measure.derive_horizon : build_grid(c).horizon();
    return build_measure_fractional(c.kernel.alpha, c.measure.derive_n, horizon, c.measure.short_time);
  }
  throw ConfigError("measure.rates", "a tabulated kernel needs explicit measure.rates and measure.weights");
}

/// [kernel] section text for k; kernel_from_config reads it back.
inline std::string to_config(const Kernel& k) {
  using detail::format_list;
  std::ostringstream os;
  os << "[kernel]\n";
  if (const auto* f = std::get_if<Fractional>(&k)) {
    os << "variant = fractional\nalpha = " << detail::format_real(f->alpha) << "\n";
  } else if (const auto* e = std::get_if<ExponentialSum>(&k)) {
    os << "variant = exponential\nrates = " << format_list(e->measure.rates())
       << "\nweights = " << format_list(e->measure.weights()) << "\n";
  } else {
    const auto& t = std::get<Tabulated>(k);
    os << "variant = tabulated\ntable_dt = " << detail::format_real(t.grid.step()) << "\nvalues = " << format_list(t.values)
       << "\n";
  }
  return os.str();
}

/// [measure] section text listing the atoms of nu.
inline std::string to_config(const LiftMeasure& nu) {
  return "[measure]\nrates = " + detail::format_list(nu.rates()) + "\nweights = " + detail::format_list(nu.weights()) +
         "\n";
}

namespace detail {

inline ModelConfig read_single_section(const std::string& text, const std::string& only) {
  const auto tree = read_sections(text);
  ModelConfig c;
  GridKeys g;
  for (const auto& [section, body] : tree) {
    if (section != only) throw ConfigError(section, "expected only a [" + only + "] section");
    for (const auto& [key, node] : body) apply_key(c, g, section, key, node.data());
  }
  return c;
}

}  // namespace detail

inline Kernel kernel_from_config(const std::string& text) {
  const auto c = detail::read_single_section(text, "kernel");
  detail::validate_kernel(c);
  return build_kernel(c);
}

inline LiftMeasure measure_from_config(const std::string& text) {
  const auto c = detail::read_single_section(text, "measure");
  detail::validate_measure(c);
  if (c.measure.rates.empty()) throw ConfigError("measure.rates", "measure.rates must list at least one rate");
  return build_measure(c);
}

inline LiftState build_lambda0(const ModelConfig& c, const LiftMeasure& nu) {
  if (!c.initial.lambda0.empty()) {
    if (c.initial.lambda0.size() != nu.size())
      throw ConfigError("initial.lambda0", "initial.lambda0 has " + std::to_string(c.initial.lambda0.size()) +
                                               " entries but the measure has " + std::to_string(nu.size()) + " atoms");
    return LiftState(c.initial.lambda0);
  }
  auto s = damped_measure(nu, c.initial.damping);
  for (double& m : s.masses) m *= c.initial.scale;
  return s;
}

inline JumpMeasureSpec build_jumps(const JumpConfig& j) {
  if (j.family == "atoms") return FiniteJumps{j.sizes, j.masses};
  if (j.family == "exponential") return ExponentialJumps{j.rate, j.intensity};
  return NoJumps{};
}

inline DriverParams build_driver(const ModelConfig& c) {
  return DriverParams{c.driver.beta, c.driver.sigma, build_jumps(c.driver.jumps)};
}

/// Initial forward curve on steps + 1 nodes of the time grid.
inline ForwardCurve build_forward_curve(const ModelConfig& c) {
  const TimeGrid grid = build_grid(c);
  if (!c.initial.curve.empty()) {
    if (c.initial.curve.size() < 2)
      throw ConfigError("initial.curve", "initial.curve needs at least two entries");
    return ForwardCurve{grid.step(), c.initial.curve};
  }
  if (c.initial.flat) return ForwardCurve{grid.step(), std::vector<double>(grid.size(), *c.initial.flat)};
  const auto nu = build_measure(c);
  return forward_curve_from_state(build_lambda0(c, nu), nu, grid.step(), grid.size());
}

inline McConfig build_mc(const ModelConfig& c) {
  McConfig mc;
  mc.paths = c.mc.paths;
  mc.seed = c.mc.seed;
  mc.antithetic = c.mc.antithetic;
  mc.placement = c.mc.placement == "end" ? DampingPlacement::EndOfStep : DampingPlacement::StartOfStep;
  return mc;
}

inline Scheme build_scheme(const ModelConfig& c, std::optional<std::size_t> n_override = std::nullopt) {
  if (c.mc.scheme == "forward") return ForwardLiftScheme{build_kernel(c), build_forward_curve(c), build_driver(c)};
  const auto nu = build_measure(c);
  const auto s = build_lambda0(c, nu);
  if (c.mc.scheme == "pure-jump" || n_override)
    return PureJumpScheme{nu, s, build_driver(c), n_override.value_or(c.mc.n)};
  if (c.mc.scheme == "eps-jump") return EpsJumpScheme{nu, s, c.eps_jump.w, build_jumps(c.eps_jump.jumps), c.eps_jump.eps};
  return HybridScheme{nu, s, build_driver(c)};
}

}  // namespace volterra_lift
