#include "pfd/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "pfd/metrics.hpp"

namespace pfd {

Placement placement_from_string(const std::string& name) {
  if (name == "before-noise") return Placement::BeforeNoise;
  if (name == "after-noise") return Placement::AfterNoise;
  throw std::invalid_argument("unknown placement: " + name);
}

std::string to_string(Placement placement) {
  return placement == Placement::BeforeNoise ? "before-noise" : "after-noise";
}

void PfConfig::validate() const {
  if (k_particles < 1) throw std::invalid_argument("pf config: k_particles must be >= 1");
  if (ess_trigger < 0.0 || ess_trigger > 1.0)
    throw std::invalid_argument("pf config: ess trigger must lie in [0,1]");
}

ParticleEnsemble pf_init(int k, double sigma_T, int dim, rng::Stream& stream) {
  if (k < 1) throw std::invalid_argument("pf_init: k must be >= 1");
  ParticleEnsemble e;
  e.states.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    Vec x(static_cast<std::size_t>(dim));
    for (double& v : x) v = sigma_T * stream.gaussian();
    e.states.push_back(std::move(x));
  }
  e.phis.assign(static_cast<std::size_t>(k), 1.0);
  e.ancestors.resize(static_cast<std::size_t>(k));
  std::iota(e.ancestors.begin(), e.ancestors.end(), 0);
  e.weights_last.assign(static_cast<std::size_t>(k), 1.0);
  return e;
}

std::vector<double> pf_weights(std::span<const double> prev_phis, std::span<const double> new_phis) {
  if (prev_phis.size() != new_phis.size())
    throw std::invalid_argument("pf_weights: phi vectors differ in length");
  std::vector<double> w(prev_phis.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(prev_phis[i] > 0.0) || !(new_phis[i] > 0.0))
      throw std::invalid_argument("pf_weights: correction values must be positive");
    w[i] = new_phis[i] / prev_phis[i];
  }
  return w;
}

std::vector<int> multinomial_resample(std::span<const double> weights, int k_draws,
                                      rng::Stream& stream) {
  std::vector<double> cum(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw std::invalid_argument("multinomial_resample: negative weight");
    total += weights[i];
    cum[i] = total;
  }
  if (!(total > 0.0)) throw std::runtime_error("multinomial_resample: all weights are zero");
  std::vector<int> ancestors(static_cast<std::size_t>(k_draws));
  for (int d = 0; d < k_draws; ++d) {
    const double u = stream.uniform() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    ancestors[static_cast<std::size_t>(d)] =
        static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
  }
  return ancestors;
}

void RunTrace::write_csv(std::ostream& out) const {
  out << "event,t,particle,weight,phi,ancestor,ess\n";
  for (const TraceRow& r : rows) {
    out << r.event << ',' << r.t << ',' << r.particle << ',' << r.weight << ',' << r.phi << ','
        << r.ancestor << ',' << r.ess << '\n';
  }
}

double SamplerConfig::t_max() const {
  return is_restart() ? std::get<RestartConfig>(cfg).t_max : std::get<EdmConfig>(cfg).t_max;
}

double SamplerConfig::t_min() const {
  return is_restart() ? std::get<RestartConfig>(cfg).t_min : std::get<EdmConfig>(cfg).t_min;
}

std::vector<EventSchedule> SamplerConfig::events() const {
  return is_restart() ? event_schedule(std::get<RestartConfig>(cfg))
                      : event_schedule(std::get<EdmConfig>(cfg));
}

namespace {

RunResult dispatch_run(std::vector<Vec> states, const SamplerConfig& sampler,
                       const ScoreProvider& provider, const Condition& c,
                       const StepStreamFn& streams, const EnsembleHook& hook) {
  if (sampler.is_restart()) {
    return restart_run(std::move(states), std::get<RestartConfig>(sampler.cfg), provider, c, streams, hook);
  }
  return edm_run(std::move(states), std::get<EdmConfig>(sampler.cfg), provider, c, streams, hook);
}

}  // namespace

PfRunResult pf_run(const PfConfig& pf, const SamplerConfig& sampler, const ScoreProvider& provider,
                   const CorrectionEvaluator& correction, const Condition& c, uint64_t cond_seed) {
  pf.validate();
  const int k = pf.k_particles;

  rng::Stream init_stream(rng::derive(cond_seed, {rng::kInit}));
  ParticleEnsemble ensemble = pf_init(k, sampler.t_max(), provider.dim(), init_stream);

  const auto schedule = sampler.events();
  const int terminal_event = static_cast<int>(schedule.size());

  RunTrace trace;
  const SamplerEvent::Phase resample_phase = pf.placement == Placement::BeforeNoise
                                                 ? SamplerEvent::Phase::BeforeNoise
                                                 : SamplerEvent::Phase::AfterNoise;

  EnsembleHook hook = [&](const SamplerEvent& ev, std::vector<Vec>& states) {
    if (ev.phase != resample_phase) return;
    std::vector<double> new_phis(static_cast<std::size_t>(k));
    for (int p = 0; p < k; ++p) {
      new_phis[static_cast<std::size_t>(p)] =
          correction.phi(states[static_cast<std::size_t>(p)], ev.t, c, ev.event_index);
    }
    const std::vector<double> w = pf_weights(ensemble.phis, new_phis);
    const double ess_value = ess(w);

    // With a trigger armed, events whose weights are still well spread are
    // skipped; the stored phis then make the next ratio telescope over the
    // skipped event.
    const bool skip = pf.ess_trigger > 0.0 && ess_value > pf.ess_trigger * static_cast<double>(k);
    std::vector<int> ancestors(static_cast<std::size_t>(k));
    std::iota(ancestors.begin(), ancestors.end(), 0);
    if (!skip) {
      rng::Stream resample_stream(rng::derive(cond_seed, {rng::kResample, static_cast<uint64_t>(ev.event_index)}));
      try {
        ancestors = multinomial_resample(w, k, resample_stream);
      } catch (const std::runtime_error& err) {
        throw std::runtime_error("resampling failed at event " + std::to_string(ev.event_index) +
                                 " (t=" + std::to_string(ev.t) + "): " + err.what());
      }
      std::vector<Vec> new_states(static_cast<std::size_t>(k));
      std::vector<double> survivor_phis(static_cast<std::size_t>(k));
      for (int p = 0; p < k; ++p) {
        new_states[static_cast<std::size_t>(p)] = states[static_cast<std::size_t>(ancestors[static_cast<std::size_t>(p)])];
        survivor_phis[static_cast<std::size_t>(p)] = new_phis[static_cast<std::size_t>(ancestors[static_cast<std::size_t>(p)])];
      }
      states = std::move(new_states);
      ensemble.phis = std::move(survivor_phis);
    }
    ensemble.ancestors = ancestors;
    ensemble.weights_last = w;
    for (int p = 0; p < k; ++p) {
      trace.rows.push_back({ev.event_index, ev.t, p, w[static_cast<std::size_t>(p)],
                            new_phis[static_cast<std::size_t>(p)], ancestors[static_cast<std::size_t>(p)],
                            ess_value});
    }
  };

  StepStreamFn streams = [&](int particle, int step) {
    return rng::Stream(rng::derive(cond_seed, {rng::kParticle, static_cast<uint64_t>(particle),
                                               rng::kStep, static_cast<uint64_t>(step)}));
  };

  RunResult run = dispatch_run(std::move(ensemble.states), sampler, provider, c, streams, hook);

  PfRunResult out;
  out.finals = std::move(run.finals);
  out.final_phis.resize(static_cast<std::size_t>(k));
  for (int p = 0; p < k; ++p) {
    out.final_phis[static_cast<std::size_t>(p)] =
        correction.phi(out.finals[static_cast<std::size_t>(p)], 0.0, c, terminal_event);
  }
  ensemble.states = std::move(run.terminal_states);
  ensemble.t = run.t_terminal;
  out.ensemble = std::move(ensemble);
  out.trace = std::move(trace);
  out.events = std::move(run.events);
  return out;
}

PfRunResult plain_run(int k, const SamplerConfig& sampler, const ScoreProvider& provider,
                      const Condition& c, uint64_t cond_seed) {
  if (k < 1) throw std::invalid_argument("plain_run: k must be >= 1");
  rng::Stream init_stream(rng::derive(cond_seed, {rng::kInit}));
  ParticleEnsemble ensemble = pf_init(k, sampler.t_max(), provider.dim(), init_stream);

  StepStreamFn streams = [&](int particle, int step) {
    return rng::Stream(rng::derive(cond_seed, {rng::kParticle, static_cast<uint64_t>(particle),
                                               rng::kStep, static_cast<uint64_t>(step)}));
  };
  RunResult run = dispatch_run(std::move(ensemble.states), sampler, provider, c, streams, {});

  PfRunResult out;
  out.finals = std::move(run.finals);
  out.final_phis.assign(static_cast<std::size_t>(k), 1.0);
  ensemble.states = std::move(run.terminal_states);
  ensemble.t = run.t_terminal;
  out.ensemble = std::move(ensemble);
  out.events = std::move(run.events);
  return out;
}

MicroPfResult pf_run_micro(const DiscreteMicroWorld& micro, int k_particles, uint64_t seed) {
  micro.validate();
  if (k_particles < 1) throw std::invalid_argument("pf_run_micro: k must be >= 1");
  const int S = micro.n_states;

  // Precompute phi tables; phi_T = 1 matches the initialization rule.
  std::vector<std::vector<double>> phis(static_cast<std::size_t>(micro.horizon) + 1);
  phis[static_cast<std::size_t>(micro.horizon)].assign(static_cast<std::size_t>(S), 1.0);
  for (int t = 0; t < micro.horizon; ++t) phis[static_cast<std::size_t>(t)] = micro.phi(t);

  rng::Stream init_stream(rng::derive(seed, {rng::kInit}));
  std::vector<int> states(static_cast<std::size_t>(k_particles));
  {
    std::vector<double> cum(static_cast<std::size_t>(S));
    std::partial_sum(micro.q_prior.begin(), micro.q_prior.end(), cum.begin());
    for (int p = 0; p < k_particles; ++p) {
      const double u = init_stream.uniform() * cum.back();
      states[static_cast<std::size_t>(p)] = static_cast<int>(
          std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      states[static_cast<std::size_t>(p)] = std::min(states[static_cast<std::size_t>(p)], S - 1);
    }
  }

  std::vector<double> prev_phis(static_cast<std::size_t>(k_particles), 1.0);
  for (int t = micro.horizon - 1; t >= 0; --t) {
    rng::Stream prop_stream(rng::derive(seed, {rng::kStep, static_cast<uint64_t>(t)}));
    std::vector<double> new_phis(static_cast<std::size_t>(k_particles));
    for (int p = 0; p < k_particles; ++p) {
      const auto& row = micro.q_transitions[static_cast<std::size_t>(t)]
                                           [static_cast<std::size_t>(states[static_cast<std::size_t>(p)])];
      double u = prop_stream.uniform();
      int next = S - 1;
      double acc = 0.0;
      for (int s = 0; s < S; ++s) {
        acc += row[static_cast<std::size_t>(s)];
        if (u < acc) {
          next = s;
          break;
        }
      }
      states[static_cast<std::size_t>(p)] = next;
      new_phis[static_cast<std::size_t>(p)] = phis[static_cast<std::size_t>(t)][static_cast<std::size_t>(next)];
    }
    const std::vector<double> w = pf_weights(prev_phis, new_phis);
    rng::Stream resample_stream(rng::derive(seed, {rng::kResample, static_cast<uint64_t>(t)}));
    const std::vector<int> ancestors = multinomial_resample(w, k_particles, resample_stream);
    std::vector<int> resampled(static_cast<std::size_t>(k_particles));
    std::vector<double> survivor_phis(static_cast<std::size_t>(k_particles));
    for (int p = 0; p < k_particles; ++p) {
      resampled[static_cast<std::size_t>(p)] = states[static_cast<std::size_t>(ancestors[static_cast<std::size_t>(p)])];
      survivor_phis[static_cast<std::size_t>(p)] = new_phis[static_cast<std::size_t>(ancestors[static_cast<std::size_t>(p)])];
    }
    states = std::move(resampled);
    prev_phis = std::move(survivor_phis);
  }

  MicroPfResult res;
  res.empirical_x0.assign(static_cast<std::size_t>(S), 0.0);
  for (int s : states) res.empirical_x0[static_cast<std::size_t>(s)] += 1.0;
  for (double& v : res.empirical_x0) v /= static_cast<double>(k_particles);
  res.final_states = std::move(states);
  return res;
}

}  // namespace pfd
