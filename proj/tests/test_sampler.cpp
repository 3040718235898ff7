#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "pfd/metrics.hpp"
#include "pfd/sampler.hpp"

using namespace pfd;

namespace {

struct ZeroScoreProvider : ScoreProvider {
  int d;
  explicit ZeroScoreProvider(int dim) : d(dim) {}
  int dim() const override { return d; }

 protected:
  Vec do_score(const Vec& x, double, const Condition&) const override { return Vec(x.size(), 0.0); }
};

MixtureWorld standard_world() {
  MixtureWorld::Params p;
  p.n_objects = 1;
  p.slot.mu_present = {0.0, 0.0};
  p.slot.mu_absent = {5.0, 5.0};
  p.miss_rate = {0.0};
  p.quality_inflation = 1.0;
  return MixtureWorld(p);
}

StepStreamFn streams_for(uint64_t seed) {
  return [seed](int particle, int step) {
    return rng::Stream(rng::derive(seed, {rng::kParticle, static_cast<uint64_t>(particle),
                                          rng::kStep, static_cast<uint64_t>(step)}));
  };
}

}  // namespace

TEST_CASE("edm step with zero score and zero churn is the identity") {
  const ZeroScoreProvider provider(2);
  rng::Stream noise(1);
  const Vec x{0.7, -1.3};
  const Vec out = edm_step(x, 1.0, 0.5, provider, Condition{}, 0.0, noise);
  CHECK(out[0] == doctest::Approx(x[0]));
  CHECK(out[1] == doctest::Approx(x[1]));
}

TEST_CASE("single euler sub-step on the standard gaussian contracts by one half") {
  // Hand integration of dx/dt = t x/(1+t^2) from t=1 to t=0 in one Euler
  // step: x + (0-1) * x/2 = 0.5 x. (The exact flow gives x/sqrt(2).)
  const MixtureWorld world = standard_world();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 1);
  rng::Stream noise(1);
  const Vec x{1.0, -2.0};
  const Vec out = edm_step(x, 1.0, 0.0, provider, c, 0.0, noise);
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("edm step argument errors") {
  const ZeroScoreProvider provider(2);
  rng::Stream noise(1);
  CHECK_THROWS_AS(edm_step(Vec{0.0, 0.0}, 0.5, 0.5, provider, Condition{}, 0.0, noise),
                  std::invalid_argument);
  CHECK_THROWS_AS(edm_step(Vec{0.0, 0.0}, 0.5, 0.9, provider, Condition{}, 0.0, noise),
                  std::invalid_argument);
}

TEST_CASE("many-step run reproduces the standard gaussian") {
  const MixtureWorld world = standard_world();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 1);
  EdmConfig cfg;
  cfg.n_steps = 64;
  cfg.t_min = 1e-3;
  cfg.t_max = 20.0;

  const int n = 10000;
  rng::Stream init(rng::derive(7, {rng::kInit}));
  std::vector<Vec> states;
  states.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vec x(2);
    for (double& v : x) v = cfg.t_max * init.gaussian();
    states.push_back(std::move(x));
  }
  const RunResult run = edm_run(std::move(states), cfg, provider, c, streams_for(7));

  double m0 = 0.0, m1 = 0.0;
  for (const Vec& x : run.finals) {
    m0 += x[0];
    m1 += x[1];
  }
  m0 /= n;
  m1 /= n;
  double c00 = 0.0, c11 = 0.0, c01 = 0.0;
  for (const Vec& x : run.finals) {
    c00 += (x[0] - m0) * (x[0] - m0);
    c11 += (x[1] - m1) * (x[1] - m1);
    c01 += (x[0] - m0) * (x[1] - m1);
  }
  c00 /= n - 1;
  c11 /= n - 1;
  c01 /= n - 1;
  CHECK(c00 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(c11 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(c01) < 0.05);

  // Gaussian-fit transport distance below 1.5x the two-independent-draws
  // baseline of the same size.
  rng::Stream ref_stream(rng::derive(8, {rng::kReference}));
  std::vector<Vec> ref1, ref2;
  for (int i = 0; i < n; ++i) {
    ref1.push_back(Vec{ref_stream.gaussian(), ref_stream.gaussian()});
    ref2.push_back(Vec{ref_stream.gaussian(), ref_stream.gaussian()});
  }
  const double baseline = frechet_distance(ref1, ref2).value;
  const double sampled = frechet_distance(run.finals, ref1).value;
  CHECK(sampled < 1.5 * baseline);
}

TEST_CASE("restart with zero intervals is the plain euler pass") {
  const MixtureWorld world = standard_world();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 1);
  RestartConfig cfg;
  cfg.n_main = 12;
  cfg.intervals.clear();
  cfg.t_min = 1e-3;
  cfg.t_max = 10.0;

  std::vector<Vec> states{Vec{3.0, -4.0}};
  const RunResult run = restart_run(states, cfg, provider, c, streams_for(3));

  // Hand-rolled Euler backward pass over the same grid.
  const TimeGrid grid = make_time_grid(cfg.n_main, cfg.t_min, cfg.t_max, StepRule::EdmPolynomial);
  Vec x{3.0, -4.0};
  for (int j = 0; j < cfg.n_main; ++j) {
    const double t_from = grid.times[static_cast<std::size_t>(j)];
    const double t_to = grid.times[static_cast<std::size_t>(j) + 1];
    const Vec d = provider.denoise(x, t_from, c);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += (t_to - t_from) * (x[i] - d[i]) / t_from;
  }
  CHECK(run.terminal_states[0][0] == x[0]);
  CHECK(run.terminal_states[0][1] == x[1]);
  CHECK(run.events.empty());
}

TEST_CASE("restart fires exactly one before and one after noise event per repetition") {
  const MixtureWorld world = standard_world();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 1);
  const RestartConfig cfg = RestartConfig::toy_default();

  std::map<std::pair<int, int>, int> before_counts, after_counts;
  int expected_events = 0;
  for (const auto& iv : cfg.intervals) expected_events += iv.repeats;

  EnsembleHook hook = [&](const SamplerEvent& ev, std::vector<Vec>&) {
    if (ev.phase == SamplerEvent::Phase::BeforeNoise) {
      ++before_counts[{ev.interval, ev.repetition}];
    } else {
      ++after_counts[{ev.interval, ev.repetition}];
    }
  };
  std::vector<Vec> states{Vec{1.0, 1.0}, Vec{-1.0, 2.0}};
  const RunResult run = restart_run(states, cfg, provider, c, streams_for(11), hook);

  CHECK(static_cast<int>(run.events.size()) == expected_events);
  CHECK(static_cast<int>(before_counts.size()) == expected_events);
  CHECK(static_cast<int>(after_counts.size()) == expected_events);
  for (const auto& [key, count] : before_counts) CHECK(count == 1);
  for (const auto& [key, count] : after_counts) CHECK(count == 1);

  // The static schedule matches what the run produced.
  const auto schedule = event_schedule(cfg);
  REQUIRE(schedule.size() == run.events.size());
  for (std::size_t e = 0; e < schedule.size(); ++e) {
    CHECK(schedule[e].interval == run.events[e].interval);
    CHECK(schedule[e].repetition == run.events[e].repetition);
    CHECK(schedule[e].t_low == doctest::Approx(run.events[e].t_low));
    CHECK(schedule[e].t_high == doctest::Approx(run.events[e].t_high));
  }
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  const MixtureWorld world = standard_world();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 1);
  const RestartConfig cfg = RestartConfig::toy_default();
  std::vector<Vec> a{Vec{0.4, 0.2}, Vec{1.0, -1.0}, Vec{2.0, 0.0}};
  std::vector<Vec> b = a;
  const RunResult ra = restart_run(a, cfg, provider, c, streams_for(99));
  const RunResult rb = restart_run(b, cfg, provider, c, streams_for(99));
  CHECK(ra.terminal_states == rb.terminal_states);
  CHECK(ra.finals == rb.finals);
}

TEST_CASE("restart config parses the published tuple syntax") {
  const RestartConfig cfg = RestartConfig::parse(
      "30, {(4, 1, 1.09, 1.92), (4, 2, 0.59, 1.09), (4, 2, 0.30, 0.59), (4, 1, 0.06, 0.30)}");
  CHECK(cfg.n_main == 30);
  REQUIRE(cfg.intervals.size() == 4);
  CHECK(cfg.intervals[0].n_restart == 4);
  CHECK(cfg.intervals[0].repeats == 1);
  CHECK(cfg.intervals[0].t_min == doctest::Approx(1.09));
  CHECK(cfg.intervals[0].t_max == doctest::Approx(1.92));
  CHECK(cfg.intervals[3].t_min == doctest::Approx(0.06));
  // Round trip.
  const RestartConfig again = RestartConfig::parse(cfg.format());
  CHECK(again.n_main == cfg.n_main);
  CHECK(again.intervals.size() == cfg.intervals.size());
}

TEST_CASE("edm config parses the steps syntax") {
  const EdmConfig cfg = EdmConfig::parse("25, {10, 13, 16, 19}");
  CHECK(cfg.n_steps == 25);
  CHECK(cfg.resample_steps == std::vector<int>{10, 13, 16, 19});
  CHECK_THROWS_AS(EdmConfig::parse("25, {10, 13, 16, 40}"), std::invalid_argument);
  CHECK_THROWS_AS(EdmConfig::parse("25 10 13"), std::invalid_argument);
}

TEST_CASE("restart config validation") {
  RestartConfig cfg = RestartConfig::toy_default();
  cfg.intervals[0].t_max = 50.0;  // above the sampling range
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RestartConfig::toy_default();
  cfg.intervals[0].t_min = cfg.intervals[0].t_max;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = RestartConfig::toy_default();
  std::swap(cfg.intervals[0], cfg.intervals[2]);  // wrong ordering
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("one-step clean prediction") {
  const MixtureWorld world = MixtureWorld::defaults();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0, 1}, 3);
  rng::Stream stream(17);
  Vec x(6);
  for (double& v : x) v = 4.0 * (stream.uniform() - 0.5);

  const Vec same = one_step_clean_prediction(x, 0.0, provider, c);
  CHECK(same == x);
  CHECK(one_step_clean_prediction(x, 1.3, provider, c) == world.mmse_denoise(c, x, 1.3));

  const Vec f = one_step_clean_prediction(x, 2.0, provider, c);
  const Vec s = provider.score(x, 2.0, c);
  for (std::size_t d = 0; d < x.size(); ++d)
    CHECK(f[d] == doctest::Approx(x[d] + 4.0 * s[d]).epsilon(1e-6));
}

TEST_CASE("churn gamma is clipped and gated") {
  EdmConfig cfg;
  cfg.n_steps = 10;
  cfg.s_churn = 100.0;  // clip to sqrt(2)-1
  cfg.s_min = 0.5;
  cfg.s_max = 2.0;
  CHECK(cfg.churn_gamma(1.0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
  CHECK(cfg.churn_gamma(3.0) == 0.0);
  CHECK(cfg.churn_gamma(0.1) == 0.0);
  cfg.s_churn = 1.0;
  CHECK(cfg.churn_gamma(1.0) == doctest::Approx(0.1));
}

TEST_CASE("nfe counting per provider") {
  const MixtureWorld world = standard_world();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 1);
  provider.reset_nfe();
  RestartConfig cfg;
  cfg.n_main = 8;
  cfg.intervals = {{3, 2, 0.2, 1.0}};
  std::vector<Vec> states{Vec{1.0, 0.0}};
  restart_run(states, cfg, provider, c, streams_for(1));
  // main pass Euler: 8 evals; excursions: 2 reps x 3 Heun steps x 2 evals;
  // final denoise: 1.
  CHECK(provider.nfe() == 8 + 2 * 3 * 2 + 1);
}
