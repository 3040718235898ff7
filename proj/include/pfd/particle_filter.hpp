#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pfd/correction.hpp"
#include "pfd/microworld.hpp"
#include "pfd/sampler.hpp"

namespace pfd {

struct ParticleEnsemble {
  std::vector<Vec> states;
  std::vector<double> phis;       // correction value carried by each particle
  std::vector<int> ancestors;     // indices from the last resampling
  std::vector<double> weights_last;
  double t = 0.0;

  int size() const { return static_cast<int>(states.size()); }
};

enum class Placement { BeforeNoise, AfterNoise };

Placement placement_from_string(const std::string& name);
std::string to_string(Placement placement);

struct PfConfig {
  int k_particles = 4;
  Placement placement = Placement::BeforeNoise;
  // 0 resamples unconditionally at every scheduled event (the faithful
  // default); a value in (0,1] skips events whose ESS/K is above it.
  double ess_trigger = 0.0;

  void validate() const;
};

// K draws from N(0, sigma_T^2 I) with unit correction values.
ParticleEnsemble pf_init(int k, double sigma_T, int dim, rng::Stream& stream);

// w_k = phi_new_k / phi_prev_k, unnormalized.
std::vector<double> pf_weights(std::span<const double> prev_phis, std::span<const double> new_phis);

// K categorical draws proportional to weights; returns ancestor indices.
std::vector<int> multinomial_resample(std::span<const double> weights, int k_draws,
                                      rng::Stream& stream);

struct TraceRow {
  int event;
  double t;
  int particle;
  double weight;
  double phi;
  int ancestor;
  double ess;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  void write_csv(std::ostream& out) const;
};

struct SamplerConfig {
  std::variant<EdmConfig, RestartConfig> cfg;

  bool is_restart() const { return std::holds_alternative<RestartConfig>(cfg); }
  double t_max() const;
  double t_min() const;
  std::vector<EventSchedule> events() const;
};

struct PfRunResult {
  ParticleEnsemble ensemble;        // at the terminal time (raw states)
  std::vector<Vec> finals;          // denoised predictions at the terminal time
  std::vector<double> final_phis;   // phi of each final at sigma=0 (selection score)
  RunTrace trace;
  std::vector<EventSchedule> events;
};

// Full Algorithm-1 loop around the continuous sampler: propose with the
// model's own transitions, weight with phi ratios at each scheduled event,
// multinomially resample. cond_seed roots this condition's stream tree.
PfRunResult pf_run(const PfConfig& pf, const SamplerConfig& sampler, const ScoreProvider& provider,
                   const CorrectionEvaluator& correction, const Condition& c, uint64_t cond_seed);

// Plain (filter-free) run with the same stream layout; k paths in lockstep.
PfRunResult plain_run(int k, const SamplerConfig& sampler, const ScoreProvider& provider,
                      const Condition& c, uint64_t cond_seed);

// Discrete adapter over a micro-world with exact phi = p_t/q_t, resampling
// at every step as in the base algorithm.
struct MicroPfResult {
  std::vector<double> empirical_x0;  // histogram over states
  std::vector<int> final_states;
};
MicroPfResult pf_run_micro(const DiscreteMicroWorld& micro, int k_particles, uint64_t seed);

}  // namespace pfd
