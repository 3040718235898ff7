#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <vector>

#include "pfd/baselines.hpp"
#include "pfd/metrics.hpp"
#include "pfd/microworld.hpp"
#include "pfd/runner.hpp"

namespace pfd {

namespace {

struct PropertyCheck {
  std::string name;
  std::function<std::string()> run;  // empty string = pass, otherwise reason
};

std::string check_appendix_a_recursion() {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const DiscreteMicroWorld micro = DiscreteMicroWorld::random(3, 3, seed);
    for (int t = 0; t <= micro.horizon; ++t) {
      const std::vector<double> v = exact_pf_target(micro, t);
      const std::vector<double> by_paths = enumerate_pf_target(micro, t);
      for (int s = 0; s < micro.n_states; ++s) {
        const double target = micro.p_marginals[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)];
        if (std::abs(v[static_cast<std::size_t>(s)] - target) > 1e-12)
          return "recursion deviates from p_t at seed " + std::to_string(seed);
        if (std::abs(by_paths[static_cast<std::size_t>(s)] - target) > 1e-12)
          return "trajectory enumeration deviates from p_t at seed " + std::to_string(seed);
      }
    }
  }
  return {};
}

std::string check_appendix_a_monte_carlo() {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const DiscreteMicroWorld micro = DiscreteMicroWorld::random(3, 3, seed);
    const MicroPfResult res = pf_run_micro(micro, 100000, 777 + seed);
    const double tv = tv_distance(res.empirical_x0, micro.p_marginals[0]);
    if (tv > 0.02)
      return "TV(empirical, p_0) = " + std::to_string(tv) + " > 0.02 at seed " + std::to_string(seed);
  }
  return {};
}

std::string check_tweedie(const MixtureWorld& world) {
  rng::Stream stream(20240517);
  const Condition c({0}, world.n_objects());
  for (int trial = 0; trial < 100; ++trial) {
    Vec x(static_cast<std::size_t>(world.dim()));
    for (double& v : x) v = 6.0 * (stream.uniform() - 0.5);
    for (double sigma : {0.3, 1.0, 3.0}) {
      const Vec f = world.mmse_denoise(c, x, sigma);
      const Vec s = world.noisy_score(c, Dist::Q, x, sigma);
      for (std::size_t d = 0; d < x.size(); ++d) {
        const double expect = x[d] + sigma * sigma * s[d];
        if (std::abs(f[d] - expect) > 1e-8)
          return "denoiser-score identity off by " + std::to_string(std::abs(f[d] - expect));
      }
    }
  }
  return {};
}

std::string check_score_finite_difference(const MixtureWorld& world) {
  rng::Stream stream(987654321);
  const Condition c({0, 2 % world.n_objects()}, world.n_objects());
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    Vec x(static_cast<std::size_t>(world.dim()));
    for (double& v : x) v = 8.0 * (stream.uniform() - 0.5);
    const double sigma = 0.2 + 2.0 * stream.uniform();
    for (Dist which : {Dist::P, Dist::Q}) {
      const Vec s = world.noisy_score(c, which, x, sigma);
      double err = 0.0, scale = 0.0;
      for (std::size_t d = 0; d < x.size(); ++d) {
        Vec xp = x, xm = x;
        xp[d] += h;
        xm[d] -= h;
        const double fd = (world.noisy_log_density(c, which, xp, sigma) -
                           world.noisy_log_density(c, which, xm, sigma)) /
                          (2.0 * h);
        err += (fd - s[d]) * (fd - s[d]);
        scale += s[d] * s[d];
      }
      if (std::sqrt(err) > 1e-5 * std::max(1.0, std::sqrt(scale)))
        return "score differs from finite differences by relative " +
               std::to_string(std::sqrt(err / std::max(scale, 1e-300)));
    }
  }
  return {};
}

std::string check_eq11_bounds() {
  const MixtureWorld world = MixtureWorld::defaults();
  AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0, 1}, world.n_objects());
  rng::Stream stream(13579);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x(static_cast<std::size_t>(world.dim()));
    for (double& v : x) v = 8.0 * (stream.uniform() - 0.5);
    const double sigma = 2.0 * stream.uniform();
    const double kappa = stream.uniform();
    const double pi = 0.05 + 0.9 * stream.uniform();
    const double num = mention_numerator(x, sigma, c, 0, provider, world);
    const double den = mention_denominator(x, sigma, c, 0, provider, world, kappa, pi);
    if (!(num > 0.0 && num <= 1.0)) return "numerator outside (0,1]";
    if (den < num - 1e-12 || den > 1.0 + 1e-12) return "denominator outside [p_hat, 1]";
    const double ratio = num / den;
    if (!(ratio > 0.0 && ratio <= 1.0 + 1e-12)) return "mention ratio outside (0,1]";
    // Monotone in pi on a grid.
    double prev = -1.0;
    for (double pg = 0.05; pg <= 0.95; pg += 0.09) {
      const double d = mention_denominator(x, sigma, c, 0, provider, world, kappa, pg);
      if (d + 1e-12 < prev) return "denominator not nondecreasing in pi";
      prev = d;
    }
  }
  // Collapse cases.
  Vec x(static_cast<std::size_t>(world.dim()), 0.0);
  const double p_hat = mention_numerator(x, 0.5, c, 0, provider, world);
  const double den_k1 = mention_denominator(x, 0.5, c, 0, provider, world, 1.0, 0.5);
  if (std::abs(den_k1 - p_hat) > 1e-12) return "kappa=1 must return the numerator exactly";
  return {};
}

std::string check_ensemble_invariants(const std::string& inject_fault) {
  const MixtureWorld world = MixtureWorld::defaults();
  AnalyticScoreProvider provider(world, Dist::Q);

  RunConfig cfg;
  cfg.world = world.params();
  cfg.sampler.cfg = RestartConfig::parse("8, {(3, 1, 0.8, 2.0), (3, 2, 0.06, 0.6)}");
  cfg.method = Method::PfAnalytic;
  cfg.k_particles = 6;
  cfg.n_conditions = 1;

  CorrectionEvaluator::Deps deps;
  deps.world = &world;
  deps.hybrid.use_unconditional_discriminator = false;
  const CorrectionEvaluator analytic(CorrectionMode::Analytic, deps);
  const Condition c({0, 1}, world.n_objects());

  // Optional fault injection: corrupt one phi to a negative value and
  // expect the weight invariant to fire.
  if (inject_fault == "negative-phi") {
    std::vector<double> prev{1.0, 1.0, 1.0};
    std::vector<double> next{0.5, -0.25, 2.0};
    try {
      (void)pf_weights(prev, next);
      return "injected negative phi was not rejected";
    } catch (const std::invalid_argument& e) {
      return std::string("injected fault detected as intended: ") + e.what();
    }
  }

  PfConfig pf;
  pf.k_particles = cfg.k_particles;
  PfRunResult run = pf_run(pf, cfg.sampler, provider, analytic, c, 4242);
  const int n_events = static_cast<int>(run.events.size());
  if (run.ensemble.size() != cfg.k_particles) return "ensemble size not conserved";
  int rows_seen = 0;
  for (const TraceRow& row : run.trace.rows) {
    ++rows_seen;
    if (row.ancestor < 0 || row.ancestor >= cfg.k_particles) return "ancestor index out of range";
    if (!(row.phi > 0.0)) return "nonpositive phi in trace";
    if (row.ess < 1.0 - 1e-9 || row.ess > cfg.k_particles + 1e-9) return "ESS outside [1, K]";
  }
  if (rows_seen != n_events * cfg.k_particles) return "trace does not cover every event";

  // Weight>0 ancestry: each chosen ancestor must have carried positive weight.
  for (const TraceRow& row : run.trace.rows) {
    if (row.weight < 0.0) return "negative resampling weight";
  }

  // K=1 degeneracy: identical trajectory to the plain sampler, same seed.
  PfConfig pf1;
  pf1.k_particles = 1;
  const PfRunResult one = pf_run(pf1, cfg.sampler, provider, analytic, c, 999);
  const PfRunResult plain = plain_run(1, cfg.sampler, provider, c, 999);
  for (std::size_t d = 0; d < one.finals[0].size(); ++d) {
    if (one.finals[0][d] != plain.finals[0][d]) return "K=1 filter deviates from the plain sampler";
  }
  return {};
}

std::string check_resampling_frequencies() {
  rng::Stream stream(rng::derive(31337, {rng::kResample}));
  {
    const std::vector<double> w{1.0, 3.0};
    const int n = 100000;
    const std::vector<int> anc = multinomial_resample(w, n, stream);
    const double freq = static_cast<double>(std::count(anc.begin(), anc.end(), 1)) / n;
    const double sd = std::sqrt(0.75 * 0.25 / n);
    if (std::abs(freq - 0.75) > 3.0 * sd)
      return "weights {1,3}: ancestor-1 frequency " + std::to_string(freq) + " outside 0.75 +/- 3sd";
  }
  {
    const std::vector<double> w{1.0, 1.0};
    const int trials = 40000;
    std::vector<int> pair_counts(4, 0);
    for (int t = 0; t < trials; ++t) {
      const std::vector<int> anc = multinomial_resample(w, 2, stream);
      ++pair_counts[static_cast<std::size_t>(anc[0] * 2 + anc[1])];
    }
    const double sd = std::sqrt(0.25 * 0.75 / trials);
    for (int combo = 0; combo < 4; ++combo) {
      const double freq = static_cast<double>(pair_counts[static_cast<std::size_t>(combo)]) / trials;
      if (std::abs(freq - 0.25) > 3.0 * sd)
        return "uniform K=2 ancestor pair " + std::to_string(combo) + " frequency " +
               std::to_string(freq) + " outside 1/4 +/- 3sd";
    }
  }
  return {};
}

std::string check_placement_ablation(const RunConfig& base) {
  int before_wins = 0;
  const int n_seeds = 10;
  for (int s = 0; s < n_seeds; ++s) {
    RunConfig cfg = base;
    cfg.method = Method::PfAnalytic;
    cfg.k_particles = 4;
    cfg.n_conditions = 250;
    cfg.seed = 5000 + static_cast<uint64_t>(s);
    cfg.placement = Placement::BeforeNoise;
    const double before = evaluate_method(cfg).frechet_ensemble;
    cfg.placement = Placement::AfterNoise;
    const double after = evaluate_method(cfg).frechet_ensemble;
    if (before <= after) ++before_wins;
  }
  if (before_wins < 8)
    return "before-noise won only " + std::to_string(before_wins) + "/10 seeds";
  return {};
}

}  // namespace

int cmd_verify(const std::string& config_path, const std::string& inject_fault,
               const CliOverrides& overrides) {
  RunConfig base;
  if (!config_path.empty()) base = RunConfig::load(config_path);
  if (overrides.seed) base.seed = *overrides.seed;
  const MixtureWorld world(base.world);

  std::vector<PropertyCheck> checks = {
      {"appendix-a-recursion", check_appendix_a_recursion},
      {"appendix-a-monte-carlo", check_appendix_a_monte_carlo},
      {"tweedie-identity", [&] { return check_tweedie(world); }},
      {"score-finite-difference", [&] { return check_score_finite_difference(world); }},
      {"eq11-bounds", check_eq11_bounds},
      {"ensemble-invariants", [&] { return check_ensemble_invariants(inject_fault); }},
      {"resampling-frequencies", check_resampling_frequencies},
      {"placement-ablation", [&] { return check_placement_ablation(base); }},
  };

  bool all_pass = true;
  for (const PropertyCheck& check : checks) {
    std::string reason;
    try {
      reason = check.run();
    } catch (const std::exception& e) {
      reason = std::string("exception: ") + e.what();
    }
    const bool pass = reason.empty();
    all_pass &= pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << check.name;
    if (!pass) std::cout << " -- " << reason;
    std::cout << std::endl;
  }
  return all_pass ? kExitOk : kExitPropertyFailure;
}

}  // namespace pfd
