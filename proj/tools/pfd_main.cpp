#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pfd/config.hpp"
#include "pfd/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Particle-filtered sampling experiments on analytic mixture worlds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  std::string inject_fault;
  pfd::CliOverrides overrides;
  uint64_t seed_override = 0;
  std::string output_override;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config) sub->add_option("config", config_path, "run-config file")->required();
    sub->add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { overrides.seed = seed_override; });
    sub->add_option("--output-dir", output_override, "override the output directory")
        ->each([&](const std::string&) { overrides.output_dir = output_override; });
  };

  CLI::App* run = app.add_subcommand("run", "run the configured method and write a report");
  add_common(run, true);
  CLI::App* kappa = app.add_subcommand("kappa", "estimate the occurrence table from an initial round");
  add_common(kappa, true);
  CLI::App* train = app.add_subcommand("train-disc", "train real/fake discriminators");
  add_common(train, true);
  CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("config", config_path, "optional run-config file");
  verify->add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { overrides.seed = seed_override; });
  verify->add_option("--inject-fault", inject_fault, "deliberately corrupt state (negative-phi)");
  CLI::App* metrics = app.add_subcommand("metrics", "recompute metrics from a stored run directory");
  metrics->add_option("run_dir", run_dir, "directory written by 'run'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? pfd::kExitOk : pfd::kExitUsage;
  }

  try {
    if (run->parsed()) return pfd::cmd_run(config_path, overrides);
    if (kappa->parsed()) return pfd::cmd_kappa(config_path, overrides);
    if (train->parsed()) return pfd::cmd_train_disc(config_path, overrides);
    if (verify->parsed()) return pfd::cmd_verify(config_path, inject_fault, overrides);
    if (metrics->parsed()) return pfd::cmd_metrics(run_dir);
  } catch (const pfd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return pfd::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return pfd::kExitPropertyFailure;
  }
  return pfd::kExitUsage;
}
