#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "pfd/metrics.hpp"
#include "pfd/microworld.hpp"
#include "pfd/toyworld.hpp"

using namespace pfd;

namespace {

MixtureWorld single_gaussian_world() {
  MixtureWorld::Params p;
  p.n_objects = 1;
  p.slot.mu_present = {0.0, 0.0};
  p.slot.mu_absent = {5.0, 5.0};  // unused when rho=0 and the object is mentioned
  p.miss_rate = {0.0};
  p.quality_inflation = 1.0;
  return MixtureWorld(p);
}

MixtureWorld default_but(double rho, double gamma) {
  MixtureWorld::Params p;
  p.miss_rate = {rho};
  p.quality_inflation = gamma;
  return MixtureWorld(p);
}

}  // namespace

TEST_CASE("noisy density of a standard slot") {
  const MixtureWorld world = single_gaussian_world();
  const Condition c({0}, 1);
  const Vec x{0.0, 0.0};
  CHECK(world.noisy_density(c, Dist::P, x, 0.0) ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(world.noisy_density(c, Dist::P, x, 1.0) ==
        doctest::Approx(1.0 / (4.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("q mixes in the absent component at the miss rate") {
  const MixtureWorld world = default_but(0.3, 1.0);
  const Condition c({0}, 3);
  Vec x(6, -2.0);
  x[0] = 2.0;
  x[1] = 2.0;  // slot 0 at mu_present, others at mu_absent
  // Frozen two-component evaluation at slot 0 (slots factor; divide the
  // other slots' unit contributions out by evaluating them too).
  const double slot0 = 0.7 / (2.0 * std::numbers::pi) +
                       0.3 * std::exp(-16.0) / (2.0 * std::numbers::pi);
  CHECK(slot0 == doctest::Approx(0.11140846553748553).epsilon(1e-12));
  const double other = 1.0 / (2.0 * std::numbers::pi);  // unmentioned absent slots at their mode
  CHECK(world.noisy_density(c, Dist::Q, x, 0.0) ==
        doctest::Approx(slot0 * other * other).epsilon(1e-12));
}

TEST_CASE("density argument errors") {
  const MixtureWorld world = MixtureWorld::defaults();
  const Condition c({0}, 3);
  CHECK_THROWS_AS(world.noisy_density(c, Dist::P, Vec{1.0, 2.0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(world.noisy_density(c, Dist::P, Vec(6, 0.0), -0.5), std::invalid_argument);
}

TEST_CASE("world parameter validation") {
  MixtureWorld::Params p;
  p.miss_rate = {1.0};
  CHECK_THROWS_AS(MixtureWorld{p}, std::invalid_argument);
  p.miss_rate = {0.3};
  p.quality_inflation = 0.5;
  CHECK_THROWS_AS(MixtureWorld{p}, std::invalid_argument);
  p.quality_inflation = 1.5;
  p.slot.var_present = 0.0;
  CHECK_THROWS_AS(MixtureWorld{p}, std::invalid_argument);
  p.slot.var_present = 1.0;
  p.slot.mu_absent = p.slot.mu_present;
  CHECK_THROWS_AS(MixtureWorld{p}, std::invalid_argument);
}

TEST_CASE("score vanishes at the mode and matches the isotropic form") {
  const MixtureWorld world = single_gaussian_world();
  const Condition c({0}, 1);
  const Vec at_mode = world.noisy_score(c, Dist::P, Vec{0.0, 0.0}, 0.0);
  CHECK(at_mode[0] == doctest::Approx(0.0));
  CHECK(at_mode[1] == doctest::Approx(0.0));
  const Vec s = world.noisy_score(c, Dist::P, Vec{2.0, 0.0}, 1.0);
  CHECK(s[0] == doctest::Approx(-1.0).epsilon(1e-12));  // -x/(1+sigma^2)
  CHECK(s[1] == doctest::Approx(0.0));
}

TEST_CASE("score equals finite differences of the log density") {
  const MixtureWorld world = MixtureWorld::defaults();
  const Condition c({0, 2}, 3);
  rng::Stream stream(2024);
  const double h = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    Vec x(6);
    for (double& v : x) v = 8.0 * (stream.uniform() - 0.5);
    const double sigma = 0.1 + 2.0 * stream.uniform();
    for (Dist which : {Dist::P, Dist::Q}) {
      const Vec s = world.noisy_score(c, which, x, sigma);
      for (std::size_t d = 0; d < x.size(); ++d) {
        Vec xp = x, xm = x;
        xp[d] += h;
        xm[d] -= h;
        const double fd = (world.noisy_log_density(c, which, xp, sigma) -
                           world.noisy_log_density(c, which, xm, sigma)) /
                          (2.0 * h);
        CHECK(s[d] == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("mmse denoiser closed forms") {
  const MixtureWorld world = single_gaussian_world();
  const Condition c({0}, 1);
  const Vec x{2.0, 0.0};
  const Vec same = world.mmse_denoise(c, x, 0.0);
  CHECK(same == x);
  const Vec shrunk = world.mmse_denoise(c, x, 1.0);
  CHECK(shrunk[0] == doctest::Approx(1.0).epsilon(1e-12));  // shrinkage 1/(1+1)
  CHECK(shrunk[1] == doctest::Approx(0.0));
}

TEST_CASE("mmse denoiser matches a Monte-Carlo posterior mean") {
  const MixtureWorld world = default_but(0.3, 1.5);
  const Condition c({0}, 3);
  const double sigma = 1.2;
  Vec x(6, 0.5);
  x[0] = 1.0;
  x[1] = -0.5;
  const Vec analytic = world.mmse_denoise(c, x, sigma);

  // Self-normalized importance estimate of E[X0 | X_t = x] for slot 0:
  // draw X0 from the slot's q mixture, weight by N(x; X0, sigma^2 I).
  rng::Stream stream(555);
  const long n = 1000000;
  double wsum = 0.0;
  double mean0 = 0.0, mean1 = 0.0;
  std::vector<double> w_cache;
  std::vector<std::pair<double, double>> x0_cache;
  w_cache.reserve(n);
  x0_cache.reserve(n);
  const auto& slot = world.params().slot;
  const double g = world.params().quality_inflation;
  for (long i = 0; i < n; ++i) {
    const bool present = stream.uniform() >= 0.3;
    const double mu0 = present ? slot.mu_present[0] : slot.mu_absent[0];
    const double mu1 = present ? slot.mu_present[1] : slot.mu_absent[1];
    const double sd = std::sqrt(g * (present ? slot.var_present : slot.var_absent));
    const double a = mu0 + sd * stream.gaussian();
    const double b = mu1 + sd * stream.gaussian();
    const double d2 = (x[0] - a) * (x[0] - a) + (x[1] - b) * (x[1] - b);
    const double w = std::exp(-d2 / (2.0 * sigma * sigma));
    wsum += w;
    mean0 += w * a;
    mean1 += w * b;
    w_cache.push_back(w);
    x0_cache.emplace_back(a, b);
  }
  mean0 /= wsum;
  mean1 /= wsum;
  // Delta-method standard error of the ratio estimator, per coordinate.
  double var0 = 0.0, var1 = 0.0;
  const double wbar = wsum / n;
  for (long i = 0; i < n; ++i) {
    const double u0 = w_cache[static_cast<std::size_t>(i)] * (x0_cache[static_cast<std::size_t>(i)].first - mean0);
    const double u1 = w_cache[static_cast<std::size_t>(i)] * (x0_cache[static_cast<std::size_t>(i)].second - mean1);
    var0 += u0 * u0;
    var1 += u1 * u1;
  }
  const double se0 = std::sqrt(var0 / n) / (wbar * std::sqrt(static_cast<double>(n)));
  const double se1 = std::sqrt(var1 / n) / (wbar * std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(analytic[0] - mean0) < 3.0 * se0 + 1e-9);
  CHECK(std::abs(analytic[1] - mean1) < 3.0 * se1 + 1e-9);
}

TEST_CASE("tweedie identity holds to machine precision") {
  const MixtureWorld world = MixtureWorld::defaults();
  const Condition c({1, 2}, 3);
  rng::Stream stream(31);
  for (int trial = 0; trial < 60; ++trial) {
    Vec x(6);
    for (double& v : x) v = 7.0 * (stream.uniform() - 0.5);
    const double sigma = 0.1 + 3.0 * stream.uniform();
    const Vec f = world.mmse_denoise(c, x, sigma);
    const Vec s = world.noisy_score(c, Dist::Q, x, sigma);
    for (std::size_t d = 0; d < x.size(); ++d) {
      CHECK(std::abs(f[d] - (x[d] + sigma * sigma * s[d])) < 1e-8);
    }
  }
}

TEST_CASE("detector oracle") {
  const MixtureWorld world = MixtureWorld::defaults();
  Vec x(6, 0.0);
  x[0] = 2.0;
  x[1] = 2.0;
  CHECK(world.detect_object(x, 0) > 0.5);
  Vec mid(6, 0.0);  // midpoint of the symmetric means
  CHECK(world.detect_object(mid, 0) == doctest::Approx(0.5).epsilon(1e-12));
  // Frozen two-Gaussian Bayes value at (0,1).
  Vec probe(6, 0.0);
  probe[0] = 0.0;
  probe[1] = 1.0;
  CHECK(world.detect_object(probe, 0) == doctest::Approx(0.9820137900379085).epsilon(1e-12));
  // Mirror symmetry.
  Vec at_absent(6, 0.0);
  at_absent[2] = -2.0;
  at_absent[3] = -2.0;
  Vec at_present(6, 0.0);
  at_present[2] = 2.0;
  at_present[3] = 2.0;
  CHECK(world.detect_object(at_absent, 1) ==
        doctest::Approx(1.0 - world.detect_object(at_present, 1)).epsilon(1e-12));
  CHECK_THROWS_AS(world.detect_object(x, 7), std::invalid_argument);
}

TEST_CASE("detector calibration over world draws") {
  const MixtureWorld rho0 = default_but(0.0, 1.0);
  const MixtureWorld rho03 = default_but(0.3, 1.5);
  const Condition c({0}, 3);
  rng::Stream stream(808);
  const int n = 10000;
  double mean_present = 0.0, mean_absent = 0.0, mean_q = 0.0;
  for (int i = 0; i < n; ++i) {
    mean_present += rho0.detect_object(rho0.sample(c, Dist::P, stream), 0);
    mean_absent += rho0.detect_object(rho0.sample(c, Dist::P, stream), 1);  // unmentioned slot
    mean_q += rho03.detect_object(rho03.sample(c, Dist::Q, stream), 0) >= 0.5 ? 1.0 : 0.0;
  }
  CHECK(mean_present / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(mean_absent / n == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
  CHECK(mean_q / n == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("noisy density integrates to one") {
  // Plain Monte-Carlo integral over a generous box, d=2 and d=4.
  auto integrate = [](const MixtureWorld& world, const Condition& c, double sigma, long n) {
    rng::Stream stream(99);
    const double lo = -9.0, hi = 9.0;
    const int dim = world.dim();
    const double vol = std::pow(hi - lo, dim);
    double acc = 0.0;
    Vec x(static_cast<std::size_t>(dim));
    for (long i = 0; i < n; ++i) {
      for (double& v : x) v = stream.uniform(lo, hi);
      acc += world.noisy_density(c, Dist::Q, x, sigma);
    }
    return vol * acc / static_cast<double>(n);
  };
  MixtureWorld::Params p1;
  p1.n_objects = 1;
  p1.miss_rate = {0.3};
  p1.quality_inflation = 1.5;
  const MixtureWorld w1(p1);
  CHECK(integrate(w1, Condition({0}, 1), 0.7, 400000) == doctest::Approx(1.0).epsilon(0.01));

  MixtureWorld::Params p2;
  p2.n_objects = 2;
  p2.miss_rate = {0.3};
  p2.quality_inflation = 1.5;
  const MixtureWorld w2(p2);
  CHECK(integrate(w2, Condition({0, 1}, 2), 0.7, 16000000) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("condition mask round trip and validation") {
  const Condition c({0, 2}, 3);
  CHECK(c.mask_string(3) == "101");
  const Condition back = Condition::from_mask_string("101");
  CHECK(back.mentions(0));
  CHECK(!back.mentions(1));
  CHECK(back.mentions(2));
  CHECK_THROWS_AS(Condition({3}, 3), std::invalid_argument);
  CHECK_THROWS_AS(Condition::from_mask_string("10x"), std::invalid_argument);
}

TEST_CASE("condition prior enumerates to a normalized distribution") {
  const ConditionPrior prior{0.5, false};
  const auto table = prior.enumerate(3);
  CHECK(table.size() == 7);  // non-empty subsets
  double total = 0.0;
  for (const auto& [c, p] : table) {
    CHECK(!c.empty());
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // Unconditional densities marginalize consistently: at sigma large the
  // mixture is normalized too (spot integral check at one point vs direct
  // weighted sum).
  const MixtureWorld world = MixtureWorld::defaults();
  Vec x(6, 0.3);
  double direct = 0.0;
  for (const auto& [c, p] : table) direct += p * world.noisy_density(c, Dist::P, x, 0.8);
  CHECK(uncond_noisy_log_density(world, prior, Dist::P, x, 0.8) ==
        doctest::Approx(std::log(direct)).epsilon(1e-12));
}

TEST_CASE("micro-world: unit correction leaves the proposal untouched") {
  DiscreteMicroWorld micro = DiscreteMicroWorld::random(3, 3, 7);
  for (int t = 0; t <= micro.horizon; ++t) micro.p_marginals[static_cast<std::size_t>(t)] = micro.q_marginal(t);
  for (int t = 0; t <= micro.horizon; ++t) {
    const auto v = exact_pf_target(micro, t);
    const auto q = micro.q_marginal(t);
    for (std::size_t s = 0; s < v.size(); ++s) CHECK(v[s] == doctest::Approx(q[s]).epsilon(1e-12));
  }
}

TEST_CASE("micro-world: filtered marginal reproduces the target exactly") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const DiscreteMicroWorld micro = DiscreteMicroWorld::random(3, 2, seed);
    for (int t = 0; t <= micro.horizon; ++t) {
      const auto v = exact_pf_target(micro, t);
      const auto by_paths = enumerate_pf_target(micro, t);
      for (int s = 0; s < micro.n_states; ++s) {
        CHECK(std::abs(v[static_cast<std::size_t>(s)] -
                       micro.p_marginals[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]) <= 1e-12);
        CHECK(std::abs(by_paths[static_cast<std::size_t>(s)] -
                       micro.p_marginals[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("micro-world validation rejects bad inputs") {
  DiscreteMicroWorld micro = DiscreteMicroWorld::random(3, 3, 11);
  micro.q_transitions[0][1][2] += 0.1;  // break row stochasticity
  CHECK_THROWS_AS(micro.validate(), std::invalid_argument);

  DiscreteMicroWorld zero = DiscreteMicroWorld::random(3, 3, 12);
  zero.p_marginals[1][0] = 0.0;  // target must have full support
  CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
}

TEST_CASE("micro-world serializes through json") {
  const DiscreteMicroWorld micro = DiscreteMicroWorld::random(4, 3, 21);
  const DiscreteMicroWorld back = DiscreteMicroWorld::from_json(micro.to_json());
  CHECK(back.n_states == micro.n_states);
  CHECK(back.horizon == micro.horizon);
  CHECK(back.q_prior == micro.q_prior);
  CHECK(back.q_transitions == micro.q_transitions);
  CHECK(back.p_marginals == micro.p_marginals);
}

TEST_CASE("world draws are deterministic per stream seed") {
  const MixtureWorld world = MixtureWorld::defaults();
  const Condition c({0, 1}, 3);
  rng::Stream a(5), b(5);
  CHECK(world.sample(c, Dist::Q, a) == world.sample(c, Dist::Q, b));
}
