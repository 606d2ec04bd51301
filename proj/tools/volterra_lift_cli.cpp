#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "volterra_lift.hpp"

namespace vl = volterra_lift;

namespace {

unsigned threads_from_env() {
  const char* env = std::getenv("VOLTERRA_LIFT_THREADS");
  if (!env || !*env) return 1;
  try {
    const long v = std::stol(env);
    return v > 0 ? static_cast<unsigned>(v) : 1u;
  } catch (const std::exception&) {
    std::cerr << "ignoring VOLTERRA_LIFT_THREADS=" << env << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Markovian lifts of affine stochastic Volterra jump-diffusions"};
  app.set_version_flag("--version", std::string(VOLTERRA_LIFT_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::string format = "csv";
  for (const auto& name : vl::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "model config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (default: VOLTERRA_LIFT_THREADS or 1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "overrides mc.seed");
    sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
  }
  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  std::ifstream in(config_path);
  std::stringstream text;
  text << in.rdbuf();

  vl::CommandOptions opt;
  opt.out = out_dir;
  opt.threads = threads > 0 ? threads : threads_from_env();
  opt.format = format;
  if (sub->count("--seed")) opt.seed = seed;

  vl::ModelConfig cfg;
  try {
    cfg = vl::parse_model_config(text.str());
  } catch (const vl::ConfigError& e) {
    // still leave a machine-readable error behind
    std::filesystem::create_directories(opt.out);
    std::ofstream(opt.out / "error.json")
        << nlohmann::ordered_json{{"error", "config"}, {"message", e.what()}, {"key", e.key()}, {"command", sub->get_name()}}
               .dump(2)
        << "\n";
    std::cerr << "config error: " << e.what() << "\n";
    return vl::kExitError;
  }

  const int code = vl::run_command(sub->get_name(), cfg, opt);
  if (code == vl::kExitError) {
    std::ifstream err(opt.out / "error.json");
    std::cerr << err.rdbuf();
  } else if (code == vl::kExitValidationFailed) {
    std::cerr << "validation outside 3 standard errors; see " << (opt.out / "summary.json").string() << "\n";
  }
  return code;
}
