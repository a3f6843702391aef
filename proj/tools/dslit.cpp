#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dslit/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::vector<double> distances;
  std::optional<std::uint64_t> frames;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "key = value configuration file");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--seed", o.seed, "master random seed");
  app->add_option("--d", o.distances, "source to slit distance in meters (repeatable)");
  app->add_option("--frames", o.frames, "number of camera frames");
  app->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--set", o.overrides, "extra key=value setting (repeatable)");
}

dslit::ExperimentConfig build_config(const CommonOptions& o, const std::filesystem::path& sidecar = {}) {
  dslit::ExperimentConfig cfg;
  if (!sidecar.empty() && std::filesystem::exists(sidecar)) dslit::apply_config_file(cfg, sidecar);
  if (!o.config.empty()) dslit::apply_config_file(cfg, o.config);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw dslit::Error(dslit::ErrorKind::config, "--set expects key=value, got " + kv);
    dslit::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.frames) cfg.n_frames = *o.frames;
  if (o.threads) cfg.threads = *o.threads;
  cfg.output_dir = o.out;
  return cfg;
}

void single_distance(dslit::ExperimentConfig& cfg, const CommonOptions& o) {
  if (o.distances.size() > 1) throw dslit::Error(dslit::ErrorKind::config, "this command takes a single --d");
  if (!o.distances.empty()) cfg.distance = o.distances.front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One- and two-photon double-slit interference simulator"};
  app.require_subcommand(1);

  CommonOptions pattern_opt, simulate_opt, analyze_opt, sweep_opt;
  auto* pattern = app.add_subcommand("pattern", "analytic intensity, coincidence, marginal and excess patterns");
  add_common(pattern, pattern_opt);
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo camera frames written to a frame file");
  add_common(simulate, simulate_opt);
  auto* analyze = app.add_subcommand("analyze", "reduce a frame file and fit visibilities");
  add_common(analyze, analyze_opt);
  std::string input;
  analyze->add_option("input", input, "frame file (default: <out>/frames.bifr)");
  auto* sweep = app.add_subcommand("sweep", "visibilities versus source distance");
  add_common(sweep, sweep_opt);
  bool monte_carlo = false;
  sweep->add_flag("--mc", monte_carlo, "also simulate and fit each distance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*pattern) {
      auto cfg = build_config(pattern_opt);
      single_distance(cfg, pattern_opt);
      dslit::cmd_pattern(cfg, std::cout);
    } else if (*simulate) {
      auto cfg = build_config(simulate_opt);
      single_distance(cfg, simulate_opt);
      dslit::cmd_simulate(cfg, std::cout);
    } else if (*analyze) {
      const std::filesystem::path frames =
          input.empty() ? std::filesystem::path(analyze_opt.out) / "frames.bifr" : std::filesystem::path(input);
      if (!std::filesystem::exists(frames)) throw dslit::Error(dslit::ErrorKind::io, "no frame file at " + frames.string());
      auto cfg = build_config(analyze_opt, dslit::sidecar_path(frames));
      single_distance(cfg, analyze_opt);
      dslit::cmd_analyze(frames, cfg, std::cout);
    } else if (*sweep) {
      auto cfg = build_config(sweep_opt);
      std::vector<double> d = sweep_opt.distances;
      if (d.empty()) d = {0.055, 0.063, 0.30, 0.54, 0.87};
      dslit::cmd_sweep(cfg, d, monte_carlo, std::cout);
    }
  } catch (const dslit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dslit::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
