#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pfd/rng.hpp"

namespace pfd {

using Vec = std::vector<double>;

struct SlotGaussianPair {
  std::array<double, 2> mu_present{2.0, 2.0};
  std::array<double, 2> mu_absent{-2.0, -2.0};
  double var_present = 1.0;
  double var_absent = 1.0;
};

/// Set of mentioned object indices. Empty means unconditional generation.
class Condition {
 public:
  Condition() = default;
  Condition(std::vector<int> mentioned, int n_objects);

  bool mentions(int i) const;
  const std::vector<int>& mentioned() const { return mentioned_; }
  bool empty() const { return mentioned_.empty(); }
  std::string mask_string(int n_objects) const;  // e.g. "101"
  static Condition from_mask_string(const std::string& mask);

 private:
  std::vector<int> mentioned_;  // sorted, unique
};

enum class Dist { P, Q };

// Ground-truth distribution p and imperfect model q over M concatenated
// 2-dim slots. Under p, slot i sits at mu_present iff object i is mentioned.
// Under q, a mentioned slot falls back to the absent component with
// probability miss_rate[i], and every component variance is scaled by
// quality_inflation. Slots are independent given the condition, so all
// noisy densities, scores and posterior means are available in closed form.
class MixtureWorld {
 public:
  struct Params {
    int n_objects = 3;
    SlotGaussianPair slot;
    std::vector<double> miss_rate{0.3};  // broadcast if a single entry
    double quality_inflation = 1.5;
  };

  explicit MixtureWorld(Params params);
  static MixtureWorld defaults() { return MixtureWorld(Params{}); }

  int n_objects() const { return params_.n_objects; }
  int dim() const { return 2 * params_.n_objects; }
  const Params& params() const { return params_; }
  double miss_rate(int i) const { return miss_rates_[static_cast<std::size_t>(i)]; }

  // Density of the sigma-noised marginal of p or q at x.
  double noisy_density(const Condition& c, Dist which, const Vec& x, double sigma) const;
  double noisy_log_density(const Condition& c, Dist which, const Vec& x, double sigma) const;

  // Gradient of the log noisy density.
  Vec noisy_score(const Condition& c, Dist which, const Vec& x, double sigma) const;

  // E_q[X0 | X_t = x], the model's posterior-mean denoiser.
  Vec mmse_denoise(const Condition& c, const Vec& x, double sigma) const;

  // Bayes posterior (equal priors) that slot i of a clean sample came from
  // the present component rather than the absent one.
  double detect_object(const Vec& x0, int i) const;

  // Clean draw from p or q given the condition.
  Vec sample(const Condition& c, Dist which, rng::Stream& stream) const;

  // Stable hash of the world parameters, embedded in artifacts.
  uint64_t hash() const;

 private:
  struct Component {
    double weight;
    std::array<double, 2> mu;
    double var;
  };
  using SlotMixture = std::vector<Component>;  // 1 or 2 components

  SlotMixture slot_mixture(const Condition& c, Dist which, int slot) const;

  Params params_;
  std::vector<double> miss_rates_;  // expanded per object
};

// Prior over conditions: each object mentioned independently with
// probability mention_prob; the empty set is rejected unless allowed.
struct ConditionPrior {
  double mention_prob = 0.5;
  bool allow_empty = false;

  Condition sample(int n_objects, rng::Stream& stream) const;
  // All conditions with their prior probabilities (renormalized over
  // non-empty sets when empties are disallowed). For unconditional
  // density/score evaluation by enumeration.
  std::vector<std::pair<Condition, double>> enumerate(int n_objects) const;
};

// Unconditional noisy log density / score, marginalizing the condition
// under the given prior by enumeration.
double uncond_noisy_log_density(const MixtureWorld& world, const ConditionPrior& prior,
                                Dist which, const Vec& x, double sigma);
Vec uncond_noisy_score(const MixtureWorld& world, const ConditionPrior& prior,
                       Dist which, const Vec& x, double sigma);

}  // namespace pfd
