#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pfd/correction.hpp"
#include "pfd/discriminator.hpp"
#include "pfd/sampler.hpp"

using namespace pfd;

namespace {

// Two unit Gaussians at +/- mu in one 2-dim slot: real draws near mu_present,
// fake draws near mu_absent.
struct TwoGaussianSetup {
  MixtureWorld world;
  Condition c;

  TwoGaussianSetup() : world(make()), c({0}, 1) {}

  static MixtureWorld make() {
    MixtureWorld::Params p;
    p.n_objects = 1;
    p.slot.mu_present = {1.0, 0.0};
    p.slot.mu_absent = {-1.0, 0.0};
    p.miss_rate = {0.0};
    p.quality_inflation = 1.0;
    return MixtureWorld(p);
  }

  // log p(x;sigma) - log q(x;sigma) = 2 mu.x / (1 + sigma^2) for unit
  // Gaussians at +/- mu.
  static double analytic_log_ratio(const Vec& x, double sigma) {
    return 2.0 * x[0] / (1.0 + sigma * sigma);
  }
};

std::vector<LabeledExample> two_gaussian_dataset(int n_per_class, rng::Stream& stream) {
  const TwoGaussianSetup setup;
  std::vector<LabeledExample> data;
  data.reserve(2 * static_cast<std::size_t>(n_per_class));
  const Condition mentioned({0}, 1);
  const Condition unmentioned({}, 1);
  for (int i = 0; i < n_per_class; ++i) {
    data.push_back({setup.world.sample(mentioned, Dist::P, stream), Condition{}, true});
    data.push_back({setup.world.sample(unmentioned, Dist::P, stream), Condition{}, false});
  }
  return data;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(j)]; });
    std::vector<double> r(v.size());
    for (std::size_t pos = 0; pos < idx.size(); ++pos) r[static_cast<std::size_t>(idx[pos])] = static_cast<double>(pos);
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("discriminator ratio algebra") {
  CHECK(ratio_from_discriminator(0.5, 1e-6) == doctest::Approx(1.0));
  CHECK(ratio_from_discriminator(0.8, 1e-6) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(ratio_from_discriminator(1.0, 1e-6) ==
        doctest::Approx((1.0 - 1e-6) / 1e-6).epsilon(1e-9));
  CHECK(ratio_from_discriminator(0.0, 1e-6) == doctest::Approx(1e-6 / (1.0 - 1e-6)).epsilon(1e-9));
}

TEST_CASE("kappa counting") {
  const MixtureWorld world = MixtureWorld::defaults();
  const std::vector<double> event_times{1.0, 0.5, 1e-3};

  auto present_sample = [&](int slot) {
    Vec x(6, -2.0);
    for (int s = 0; s < 3; ++s) {
      x[static_cast<std::size_t>(2 * s)] = s == slot ? 2.0 : -2.0;
      x[static_cast<std::size_t>(2 * s) + 1] = s == slot ? 2.0 : -2.0;
    }
    return x;
  };

  SUBCASE("perfect detection gives kappa one") {
    std::vector<PlainRunRecord> runs;
    for (int h = 0; h < 4; ++h) {
      PlainRunRecord rec;
      rec.c = Condition({0}, 3);
      rec.f_at_events.assign(3, present_sample(0));
      runs.push_back(std::move(rec));
    }
    const KappaTable table = estimate_kappa(runs, world, event_times, "before-noise");
    for (int e = 0; e < 3; ++e) CHECK(table.at(e, 0) == doctest::Approx(1.0));
    CHECK(table.h_runs == 4);
  }

  SUBCASE("three of four detections give 0.75") {
    std::vector<PlainRunRecord> runs;
    for (int h = 0; h < 4; ++h) {
      PlainRunRecord rec;
      rec.c = Condition({0}, 3);
      Vec f = h < 3 ? present_sample(0) : present_sample(1);  // last run misses object 0
      rec.f_at_events.assign(3, f);
      runs.push_back(std::move(rec));
    }
    const KappaTable table = estimate_kappa(runs, world, event_times, "before-noise");
    CHECK(table.at(0, 0) == doctest::Approx(0.75));
  }

  SUBCASE("never-mentioned objects fall back to the default and are flagged") {
    std::vector<PlainRunRecord> runs;
    for (int h = 0; h < 4; ++h) {
      PlainRunRecord rec;
      rec.c = Condition({0}, 3);
      rec.f_at_events.assign(3, present_sample(0));
      runs.push_back(std::move(rec));
    }
    const KappaTable table = estimate_kappa(runs, world, event_times, "before-noise");
    CHECK(table.at(1, 2) == doctest::Approx(0.5));
    CHECK(!table.defaulted_cells.empty());
  }

  SUBCASE("empty run set is an error") {
    CHECK_THROWS_AS(estimate_kappa({}, world, event_times, "before-noise"), std::invalid_argument);
  }
}

TEST_CASE("mention numerator") {
  const MixtureWorld world = MixtureWorld::defaults();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 3);

  Vec present(6, -2.0);
  present[0] = 2.0;
  present[1] = 2.0;
  CHECK(mention_numerator(present, 0.0, c, 0, provider, world) > 0.99);

  Vec mid(6, -2.0);
  mid[0] = 0.0;
  mid[1] = 0.0;
  CHECK(mention_numerator(mid, 0.0, c, 0, provider, world) == doctest::Approx(0.5).epsilon(1e-12));

  rng::Stream stream(4);
  Vec x(6);
  for (double& v : x) v = 4.0 * (stream.uniform() - 0.5);
  CHECK(mention_numerator(x, 1.0, c, 0, provider, world) ==
        doctest::Approx(world.detect_object(world.mmse_denoise(c, x, 1.0), 0)).epsilon(1e-12));

  CHECK_THROWS_AS(mention_numerator(x, 1.0, c, 1, provider, world), std::invalid_argument);
}

TEST_CASE("mention denominator collapse cases") {
  const MixtureWorld world = MixtureWorld::defaults();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0}, 3);

  // Deep in the absent region the numerator is numerically zero.
  Vec far(6, -2.0);
  far[0] = -30.0;
  far[1] = -30.0;
  CHECK(mention_denominator(far, 0.0, c, 0, provider, world, 0.0, 0.5) ==
        doctest::Approx(0.5).epsilon(1e-9));
  CHECK(mention_denominator(far, 0.0, c, 0, provider, world, 0.75, 0.5) ==
        doctest::Approx(0.2).epsilon(1e-9));

  // kappa = 1 returns the numerator exactly.
  rng::Stream stream(6);
  Vec x(6);
  for (double& v : x) v = 5.0 * (stream.uniform() - 0.5);
  const double p_hat = mention_numerator(x, 0.7, c, 0, provider, world);
  CHECK(mention_denominator(x, 0.7, c, 0, provider, world, 1.0, 0.5) ==
        doctest::Approx(p_hat).epsilon(1e-12));
}

TEST_CASE("eq-11 bounds and pi monotonicity") {
  const MixtureWorld world = MixtureWorld::defaults();
  const AnalyticScoreProvider provider(world, Dist::Q);
  const Condition c({0, 1}, 3);
  rng::Stream stream(8);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x(6);
    for (double& v : x) v = 8.0 * (stream.uniform() - 0.5);
    const double sigma = 2.0 * stream.uniform();
    const double kappa = stream.uniform();
    const double num = mention_numerator(x, sigma, c, 0, provider, world);
    double prev_den = -1.0;
    for (double pi : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double den = mention_denominator(x, sigma, c, 0, provider, world, kappa, pi);
      CHECK(den >= num - 1e-12);
      CHECK(den <= 1.0 + 1e-12);
      CHECK(num / den > 0.0);
      CHECK(num / den <= 1.0 + 1e-12);
      CHECK(den >= prev_den - 1e-12);
      prev_den = den;
    }
  }
}

TEST_CASE("hybrid config validation") {
  HybridConfig cfg;
  cfg.pi = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = HybridConfig{};
  cfg.ratio_floor = 0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = HybridConfig{};
  cfg.use_unconditional_discriminator = true;
  cfg.analytic_oracle = true;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("correction dispatch") {
  const Condition c({0}, 3);

  SUBCASE("analytic mode with p=q is unity") {
    MixtureWorld::Params p;
    p.miss_rate = {0.0};
    p.quality_inflation = 1.0;
    const MixtureWorld same(p);
    CorrectionEvaluator::Deps deps;
    deps.world = &same;
    deps.hybrid.use_unconditional_discriminator = false;
    const CorrectionEvaluator eval(CorrectionMode::Analytic, deps);
    rng::Stream stream(3);
    for (int i = 0; i < 20; ++i) {
      Vec x(6);
      for (double& v : x) v = 6.0 * (stream.uniform() - 0.5);
      CHECK(eval.phi(x, stream.uniform(0.0, 2.0), c, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("analytic mode flags missing objects against a direct density oracle") {
    const MixtureWorld world = MixtureWorld::defaults();
    CorrectionEvaluator::Deps deps;
    deps.world = &world;
    deps.hybrid.use_unconditional_discriminator = false;
    const CorrectionEvaluator eval(CorrectionMode::Analytic, deps);

    Vec missing(6, -2.0);  // mentioned slot 0 sits at the absent mean
    Vec present(6, -2.0);
    present[0] = 2.0;
    present[1] = 2.0;
    const double sigma = 0.4;
    const double phi_missing = eval.phi(missing, sigma, c, 0);
    const double phi_present = eval.phi(present, sigma, c, 0);
    CHECK(phi_missing < 1.0);
    CHECK(phi_present > 1.0);

    // Independent per-slot normal-mixture evaluation.
    auto normal2 = [](double dx, double dy, double v) {
      return std::exp(-(dx * dx + dy * dy) / (2.0 * v)) / (2.0 * std::numbers::pi * v);
    };
    auto direct_ratio = [&](const Vec& x) {
      double p_val = 1.0, q_val = 1.0;
      for (int s = 0; s < 3; ++s) {
        const double u = x[static_cast<std::size_t>(2 * s)], w = x[static_cast<std::size_t>(2 * s) + 1];
        const double vp = 1.0 + sigma * sigma;
        const double vq = 1.5 + sigma * sigma;
        const double np = normal2(u - 2.0, w - 2.0, vp);
        const double na = normal2(u + 2.0, w + 2.0, vp);
        const double nqp = normal2(u - 2.0, w - 2.0, vq);
        const double nqa = normal2(u + 2.0, w + 2.0, vq);
        if (s == 0) {
          p_val *= np;
          q_val *= 0.7 * nqp + 0.3 * nqa;
        } else {
          p_val *= na;
          q_val *= nqa;
        }
      }
      return p_val / q_val;
    };
    CHECK(phi_missing == doctest::Approx(direct_ratio(missing)).epsilon(1e-9));
    CHECK(phi_present == doctest::Approx(direct_ratio(present)).epsilon(1e-9));
  }

  SUBCASE("hybrid with kappa one and no quality term is unity") {
    const MixtureWorld world = MixtureWorld::defaults();
    const AnalyticScoreProvider provider(world, Dist::Q);
    KappaTable kappa;
    kappa.n_objects = 3;
    kappa.h_runs = 100;
    kappa.event_times = {1.0, 1e-3};
    kappa.placement = "before-noise";
    kappa.values = {{1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
    kappa.hit_counts = {{100, 100, 100}, {100, 100, 100}};
    kappa.mention_counts = {100, 100, 100};

    CorrectionEvaluator::Deps deps;
    deps.world = &world;
    deps.provider = &provider;
    deps.kappa = &kappa;
    deps.hybrid.use_unconditional_discriminator = false;
    const CorrectionEvaluator eval(CorrectionMode::Hybrid, deps);
    rng::Stream stream(5);
    for (int i = 0; i < 10; ++i) {
      Vec x(6);
      for (double& v : x) v = 6.0 * (stream.uniform() - 0.5);
      CHECK(eval.phi(x, 0.6, c, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("dispatch is pure") {
    const MixtureWorld world = MixtureWorld::defaults();
    CorrectionEvaluator::Deps deps;
    deps.world = &world;
    deps.hybrid.use_unconditional_discriminator = false;
    const CorrectionEvaluator eval(CorrectionMode::Analytic, deps);
    const Vec x(6, 0.25);
    CHECK(eval.phi(x, 0.8, c, 0) == eval.phi(x, 0.8, c, 0));
  }

  SUBCASE("missing dependencies are configuration errors") {
    CorrectionEvaluator::Deps none;
    none.hybrid.use_unconditional_discriminator = false;
    CHECK_THROWS_AS(CorrectionEvaluator(CorrectionMode::Analytic, none), std::invalid_argument);
    CHECK_THROWS_AS(CorrectionEvaluator(CorrectionMode::Discriminator, none), std::invalid_argument);
    CHECK_THROWS_AS(CorrectionEvaluator(CorrectionMode::Hybrid, none), std::invalid_argument);
  }
}

TEST_CASE("phi clamps to the configured range") {
  const MixtureWorld world = MixtureWorld::defaults();
  CorrectionEvaluator::Deps deps;
  deps.world = &world;
  deps.hybrid.use_unconditional_discriminator = false;
  deps.hybrid.ratio_floor = 1e-6;
  const CorrectionEvaluator eval(CorrectionMode::Analytic, deps);
  const Condition c({0, 1, 2}, 3);
  Vec extreme(6, -2.0);  // all mentioned slots missing: tiny ratio
  const double phi = eval.phi(extreme, 0.05, c, 0);
  CHECK(phi >= 1e-6);
  CHECK(phi <= 1e6);
}

TEST_CASE("training rejects degenerate single-class data") {
  rng::Stream stream(1);
  std::vector<LabeledExample> data;
  for (int i = 0; i < 100; ++i) data.push_back({Vec{0.0, 0.0}, Condition{}, true});
  CHECK_THROWS_AS(train_discriminator(data, NoiseSchedule::ve(), false, TrainOptions{}, stream),
                  std::runtime_error);
}

TEST_CASE("indistinguishable classes train to one half") {
  const TwoGaussianSetup setup;
  rng::Stream stream(77);
  std::vector<LabeledExample> data;
  const Condition mentioned({0}, 1);
  for (int i = 0; i < 3000; ++i) {
    data.push_back({setup.world.sample(mentioned, Dist::P, stream), Condition{}, true});
    data.push_back({setup.world.sample(mentioned, Dist::P, stream), Condition{}, false});
  }
  TrainOptions opts;
  const TrainResult result = train_discriminator(data, NoiseSchedule::ve(), false, opts, stream);

  double mean_d = 0.0;
  const int n_eval = 1000;
  rng::Stream eval_stream(78);
  for (int i = 0; i < n_eval; ++i) {
    Vec x = setup.world.sample(mentioned, Dist::P, eval_stream);
    const double sigma = eval_stream.uniform(1e-5, 1.0);
    for (double& v : x) v += sigma * eval_stream.gaussian();
    mean_d += Discriminator(result.discriminator).value(x, sigma, Condition{});
  }
  mean_d /= n_eval;
  CHECK(mean_d > 0.45);
  CHECK(mean_d < 0.55);
}

TEST_CASE("well-specified two-gaussian training recovers the ratio ordering") {
  rng::Stream stream(123);
  std::vector<LabeledExample> data = two_gaussian_dataset(4000, stream);
  TrainOptions opts;
  opts.epochs = 2;
  const TrainResult result = train_discriminator(data, NoiseSchedule::ve(), false, opts, stream);
  CHECK(result.final_train_loss < std::log(2.0));

  // Rank correlation against the analytic log ratio on a fixed-sigma slice
  // of held-out bulk points.
  const TwoGaussianSetup setup;
  const double sigma = 0.3;
  rng::Stream eval_stream(321);
  std::vector<double> learned, analytic;
  while (learned.size() < 1000) {
    const bool real = eval_stream.uniform() < 0.5;
    Vec x = setup.world.sample(Condition(real ? std::vector<int>{0} : std::vector<int>{}, 1),
                               Dist::P, eval_stream);
    for (double& v : x) v += sigma * eval_stream.gaussian();
    if (std::abs(x[0]) > 3.0 || std::abs(x[1]) > 3.0) continue;
    learned.push_back(result.discriminator.logit(x, sigma, Condition{}));
    analytic.push_back(TwoGaussianSetup::analytic_log_ratio(x, sigma));
  }
  CHECK(spearman(learned, analytic) > 0.95);
}

TEST_CASE("discriminator separates the default worlds") {
  const MixtureWorld world = MixtureWorld::defaults();
  const ConditionPrior prior{0.5, false};
  ExampleSampler real = [&](rng::Stream& s) {
    const Condition c = prior.sample(3, s);
    return std::make_pair(world.sample(c, Dist::P, s), c);
  };
  ExampleSampler fake = [&](rng::Stream& s) {
    const Condition c = prior.sample(3, s);
    return std::make_pair(world.sample(c, Dist::Q, s), c);
  };
  rng::Stream stream(9);
  TrainOptions opts;
  opts.n_samples = 4000;
  const TrainResult result =
      train_discriminator(real, fake, NoiseSchedule::ve(), true, 3, opts, stream);
  CHECK(result.heldout_accuracy > 0.5);
  CHECK(result.final_train_loss < std::log(2.0));

  CHECK_THROWS_AS(
      train_discriminator(real, fake, NoiseSchedule::ve(), true, 3, TrainOptions{.n_samples = 100}, stream),
      std::invalid_argument);
}

TEST_CASE("logit gradient matches finite differences") {
  rng::Stream stream(55);
  std::vector<LabeledExample> data = two_gaussian_dataset(2000, stream);
  const TrainResult result = train_discriminator(data, NoiseSchedule::ve(), false, TrainOptions{}, stream);
  const Discriminator& d = result.discriminator;

  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    Vec x{stream.uniform(-3.0, 3.0), stream.uniform(-3.0, 3.0)};
    const double sigma = stream.uniform(0.0, 1.0);
    const Vec g = d.logit_gradient_x(x, sigma, Condition{});
    for (std::size_t k = 0; k < x.size(); ++k) {
      Vec xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fd = (d.logit(xp, sigma, Condition{}) - d.logit(xm, sigma, Condition{})) / (2.0 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}
