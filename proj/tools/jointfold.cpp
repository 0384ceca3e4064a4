// jointfold <experiment> [--config FILE] [--seed N] [--out DIR] [--threads N] [--trials N]
//
// Exit status: 0 all assertion checks pass, 1 a check failed, 2 usage/config/input error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jointfold/harness.hpp"

namespace {

std::string join_names() {
  std::string s;
  for (const auto& n : jointfold::experiment_names()) s += (s.empty() ? "" : " | ") + n;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint-manifold experiments and property checks"};
  app.set_version_flag("--version", std::string(jointfold::kVersion));
  std::string experiment, config_path, out;
  std::uint64_t seed = 0;
  int threads = 0;
  long long trials = 0;
  app.add_option("experiment", experiment, join_names())->required();
  app.add_option("-c,--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("-s,--seed", seed, "root seed (overrides the config)");
  auto* out_opt = app.add_option("-o,--out", out, "output directory");
  auto* threads_opt = app.add_option("-t,--threads", threads, "worker threads (default: JOINTFOLD_THREADS or all cores)")
                          ->check(CLI::NonNegativeNumber);
  auto* trials_opt = app.add_option("--trials", trials, "Monte Carlo trials (classify, verify-all)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    jointfold::ExperimentConfig cfg =
        config_path.empty() ? jointfold::parse_config(jointfold::json::object()) : jointfold::load_config(config_path);
    if (!cfg.experiment.empty() && cfg.experiment != experiment)
      throw jointfold::ConfigError("experiment: config names '" + cfg.experiment + "' but '" + experiment +
                                   "' was requested");
    cfg.experiment = experiment;
    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.out = out;
    if (*threads_opt) cfg.threads = threads;
    if (*trials_opt) cfg.trials = static_cast<jointfold::Index>(trials);

    const jointfold::RunManifest m = jointfold::run(cfg);
    for (const auto& w : m.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& c : m.checks)
      std::printf("%-5s %-20s %-44s %.6g %s %.6g%s\n", c.pass ? "PASS" : (c.assertion ? "FAIL" : "note"), c.module.c_str(),
                  c.name.c_str(), c.measured, c.relation.c_str(), c.threshold, c.assertion ? "" : "  (observation)");
    if (cfg.out.empty()) std::printf("%s\n", jointfold::to_json(m).dump(2).c_str());
    return m.passed() ? 0 : 1;
  } catch (const jointfold::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
  } catch (const jointfold::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
  }
  return 2;
}
