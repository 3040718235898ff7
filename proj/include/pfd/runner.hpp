#pragma once

#include <optional>
#include <string>

#include "pfd/artifacts.hpp"
#include "pfd/config.hpp"
#include "pfd/metrics.hpp"
#include "pfd/particle_filter.hpp"

namespace pfd {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitPropertyFailure = 1;
inline constexpr int kExitUsage = 2;

struct CliOverrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> output_dir;
};

// Resolved dependencies for one experiment: the world plus whatever trained
// artifacts the configured method needs.
struct ExperimentSetup {
  RunConfig cfg;
  MixtureWorld world;
  ConditionPrior prior;
  std::optional<Discriminator> cond_disc;
  std::optional<Discriminator> uncond_disc;
  std::optional<KappaTable> kappa;

  explicit ExperimentSetup(RunConfig config)
      : cfg(std::move(config)), world(cfg.world), prior{cfg.mention_prob, !cfg.conditional} {}

  static ExperimentSetup prepare(RunConfig cfg);
};

struct MethodOutputs {
  std::vector<Condition> conditions;
  std::vector<std::vector<Vec>> finals;       // [condition][particle]
  std::vector<std::vector<Vec>> references;   // matched p draws
  std::vector<int> selected;                  // chosen particle per condition
  std::vector<std::vector<double>> final_phis;
  RunTrace trace;                             // rows grouped by condition
  std::vector<double> event_times;            // resampling events + terminal
  std::vector<double> ess_event_mean;         // mean ESS per event
  double ess_min = 0.0;
  long long nfe = 0;
};

MethodOutputs run_method(const ExperimentSetup& setup);

struct MethodMetrics {
  double occurrence_ensemble = 0.0;
  double occurrence_selected = 0.0;
  double frechet_ensemble = 0.0;
  double frechet_selected = 0.0;
  std::vector<double> per_object_occurrence;
  long long nfe = 0;
};

MethodMetrics compute_metrics(const ExperimentSetup& setup, const MethodOutputs& outputs);

// prepare + run + metrics, no filesystem involved; the acceptance suite and
// tests drive experiments through this.
MethodMetrics evaluate_method(RunConfig cfg);

// Initial filter-free generation round for the kappa statistics.
KappaTable estimate_kappa_for(const RunConfig& cfg, const MixtureWorld& world, uint64_t seed);

int cmd_run(const std::string& config_path, const CliOverrides& overrides);
int cmd_kappa(const std::string& config_path, const CliOverrides& overrides);
int cmd_train_disc(const std::string& config_path, const CliOverrides& overrides);
int cmd_verify(const std::string& config_path, const std::string& inject_fault,
               const CliOverrides& overrides);
int cmd_metrics(const std::string& run_dir);

// Output root resolution: $PFD_OUTPUT_ROOT prefixes relative output dirs.
std::string resolve_output_dir(const std::string& configured);

}  // namespace pfd
