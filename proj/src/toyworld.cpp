#include "pfd/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace pfd {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

// log N(x; mu, v*I2) for a 2-dim slot.
double slot_log_normal(const double* x, const std::array<double, 2>& mu, double v) {
  const double dx = x[0] - mu[0];
  const double dy = x[1] - mu[1];
  return -kLog2Pi - std::log(v) - (dx * dx + dy * dy) / (2.0 * v);
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logsumexp2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

Condition::Condition(std::vector<int> mentioned, int n_objects) : mentioned_(std::move(mentioned)) {
  std::sort(mentioned_.begin(), mentioned_.end());
  mentioned_.erase(std::unique(mentioned_.begin(), mentioned_.end()), mentioned_.end());
  for (int i : mentioned_) {
    if (i < 0 || i >= n_objects) throw std::invalid_argument("condition mentions object out of range");
  }
}

bool Condition::mentions(int i) const {
  return std::binary_search(mentioned_.begin(), mentioned_.end(), i);
}

std::string Condition::mask_string(int n_objects) const {
  std::string s(static_cast<std::size_t>(n_objects), '0');
  for (int i : mentioned_) s[static_cast<std::size_t>(i)] = '1';
  return s;
}

Condition Condition::from_mask_string(const std::string& mask) {
  std::vector<int> mentioned;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == '1') {
      mentioned.push_back(static_cast<int>(i));
    } else if (mask[i] != '0') {
      throw std::invalid_argument("condition mask must contain only 0/1");
    }
  }
  return Condition(std::move(mentioned), static_cast<int>(mask.size()));
}

MixtureWorld::MixtureWorld(Params params) : params_(std::move(params)) {
  if (params_.n_objects < 1) throw std::invalid_argument("world: n_objects must be >= 1");
  if (params_.slot.var_present <= 0.0 || params_.slot.var_absent <= 0.0)
    throw std::invalid_argument("world: slot variances must be positive");
  if (params_.slot.mu_present == params_.slot.mu_absent)
    throw std::invalid_argument("world: present/absent means must differ");
  if (params_.quality_inflation < 1.0)
    throw std::invalid_argument("world: quality_inflation must be >= 1");
  if (params_.miss_rate.empty())
    throw std::invalid_argument("world: miss_rate must not be empty");
  if (params_.miss_rate.size() == 1) {
    miss_rates_.assign(static_cast<std::size_t>(params_.n_objects), params_.miss_rate[0]);
  } else if (params_.miss_rate.size() == static_cast<std::size_t>(params_.n_objects)) {
    miss_rates_ = params_.miss_rate;
  } else {
    throw std::invalid_argument("world: miss_rate must have 1 or n_objects entries");
  }
  for (double r : miss_rates_) {
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("world: miss rates must lie in [0,1)");
  }
}

MixtureWorld::SlotMixture MixtureWorld::slot_mixture(const Condition& c, Dist which, int slot) const {
  const auto& sg = params_.slot;
  const bool mentioned = c.mentions(slot);
  if (which == Dist::P) {
    if (mentioned) return {{1.0, sg.mu_present, sg.var_present}};
    return {{1.0, sg.mu_absent, sg.var_absent}};
  }
  const double g = params_.quality_inflation;
  if (!mentioned) return {{1.0, sg.mu_absent, g * sg.var_absent}};
  const double rho = miss_rates_[static_cast<std::size_t>(slot)];
  if (rho == 0.0) return {{1.0, sg.mu_present, g * sg.var_present}};
  return {{1.0 - rho, sg.mu_present, g * sg.var_present},
          {rho, sg.mu_absent, g * sg.var_absent}};
}

double MixtureWorld::noisy_log_density(const Condition& c, Dist which, const Vec& x, double sigma) const {
  if (static_cast<int>(x.size()) != dim()) throw std::invalid_argument("noisy_density: dimension mismatch");
  if (sigma < 0.0) throw std::invalid_argument("noisy_density: sigma must be >= 0");
  const double s2 = sigma * sigma;
  double total = 0.0;
  for (int s = 0; s < params_.n_objects; ++s) {
    const double* xs = x.data() + 2 * s;
    const SlotMixture mix = slot_mixture(c, which, s);
    if (mix.size() == 1) {
      total += slot_log_normal(xs, mix[0].mu, mix[0].var + s2);
    } else {
      const double a = std::log(mix[0].weight) + slot_log_normal(xs, mix[0].mu, mix[0].var + s2);
      const double b = std::log(mix[1].weight) + slot_log_normal(xs, mix[1].mu, mix[1].var + s2);
      total += logsumexp2(a, b);
    }
  }
  return total;
}

double MixtureWorld::noisy_density(const Condition& c, Dist which, const Vec& x, double sigma) const {
  return std::exp(noisy_log_density(c, which, x, sigma));
}

Vec MixtureWorld::noisy_score(const Condition& c, Dist which, const Vec& x, double sigma) const {
  if (static_cast<int>(x.size()) != dim()) throw std::invalid_argument("noisy_score: dimension mismatch");
  if (sigma < 0.0) throw std::invalid_argument("noisy_score: sigma must be >= 0");
  const double s2 = sigma * sigma;
  Vec score(x.size(), 0.0);
  for (int s = 0; s < params_.n_objects; ++s) {
    const double* xs = x.data() + 2 * s;
    double* out = score.data() + 2 * s;
    const SlotMixture mix = slot_mixture(c, which, s);
    if (mix.size() == 1) {
      const double v = mix[0].var + s2;
      out[0] = (mix[0].mu[0] - xs[0]) / v;
      out[1] = (mix[0].mu[1] - xs[1]) / v;
    } else {
      const double v0 = mix[0].var + s2;
      const double v1 = mix[1].var + s2;
      const double a = std::log(mix[0].weight) + slot_log_normal(xs, mix[0].mu, v0);
      const double b = std::log(mix[1].weight) + slot_log_normal(xs, mix[1].mu, v1);
      const double r0 = logistic(a - b);  // responsibility of component 0
      const double r1 = 1.0 - r0;
      out[0] = r0 * (mix[0].mu[0] - xs[0]) / v0 + r1 * (mix[1].mu[0] - xs[0]) / v1;
      out[1] = r0 * (mix[0].mu[1] - xs[1]) / v0 + r1 * (mix[1].mu[1] - xs[1]) / v1;
    }
  }
  return score;
}

Vec MixtureWorld::mmse_denoise(const Condition& c, const Vec& x, double sigma) const {
  if (static_cast<int>(x.size()) != dim()) throw std::invalid_argument("mmse_denoise: dimension mismatch");
  if (sigma < 0.0) throw std::invalid_argument("mmse_denoise: sigma must be >= 0");
  if (sigma == 0.0) return x;
  const double s2 = sigma * sigma;
  Vec out(x.size(), 0.0);
  for (int s = 0; s < params_.n_objects; ++s) {
    const double* xs = x.data() + 2 * s;
    double* os = out.data() + 2 * s;
    const SlotMixture mix = slot_mixture(c, Dist::Q, s);
    if (mix.size() == 1) {
      const double shrink = mix[0].var / (mix[0].var + s2);
      os[0] = mix[0].mu[0] + shrink * (xs[0] - mix[0].mu[0]);
      os[1] = mix[0].mu[1] + shrink * (xs[1] - mix[0].mu[1]);
    } else {
      const double a = std::log(mix[0].weight) + slot_log_normal(xs, mix[0].mu, mix[0].var + s2);
      const double b = std::log(mix[1].weight) + slot_log_normal(xs, mix[1].mu, mix[1].var + s2);
      const double r0 = logistic(a - b);
      const double r1 = 1.0 - r0;
      const double k0 = mix[0].var / (mix[0].var + s2);
      const double k1 = mix[1].var / (mix[1].var + s2);
      for (int d = 0; d < 2; ++d) {
        os[d] = r0 * (mix[0].mu[d] + k0 * (xs[d] - mix[0].mu[d])) +
                r1 * (mix[1].mu[d] + k1 * (xs[d] - mix[1].mu[d]));
      }
    }
  }
  return out;
}

double MixtureWorld::detect_object(const Vec& x0, int i) const {
  if (static_cast<int>(x0.size()) != dim()) throw std::invalid_argument("detect_object: dimension mismatch");
  if (i < 0 || i >= params_.n_objects) throw std::invalid_argument("detect_object: object index out of range");
  const double* xs = x0.data() + 2 * i;
  const double lp = slot_log_normal(xs, params_.slot.mu_present, params_.slot.var_present);
  const double la = slot_log_normal(xs, params_.slot.mu_absent, params_.slot.var_absent);
  return logistic(lp - la);
}

Vec MixtureWorld::sample(const Condition& c, Dist which, rng::Stream& stream) const {
  Vec x(static_cast<std::size_t>(dim()));
  for (int s = 0; s < params_.n_objects; ++s) {
    const SlotMixture mix = slot_mixture(c, which, s);
    std::size_t j = 0;
    if (mix.size() == 2 && stream.uniform() < mix[1].weight) j = 1;
    const double sd = std::sqrt(mix[j].var);
    x[2 * s] = mix[j].mu[0] + sd * stream.gaussian();
    x[2 * s + 1] = mix[j].mu[1] + sd * stream.gaussian();
  }
  return x;
}

uint64_t MixtureWorld::hash() const {
  auto h_double = [](uint64_t h, double v) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    return rng::mix(h, bits);
  };
  uint64_t h = rng::mix(0x70667764ull, static_cast<uint64_t>(params_.n_objects));
  h = h_double(h, params_.slot.mu_present[0]);
  h = h_double(h, params_.slot.mu_present[1]);
  h = h_double(h, params_.slot.mu_absent[0]);
  h = h_double(h, params_.slot.mu_absent[1]);
  h = h_double(h, params_.slot.var_present);
  h = h_double(h, params_.slot.var_absent);
  h = h_double(h, params_.quality_inflation);
  for (double r : miss_rates_) h = h_double(h, r);
  return h;
}

Condition ConditionPrior::sample(int n_objects, rng::Stream& stream) const {
  for (;;) {
    std::vector<int> mentioned;
    for (int i = 0; i < n_objects; ++i) {
      if (stream.uniform() < mention_prob) mentioned.push_back(i);
    }
    if (!mentioned.empty() || allow_empty) return Condition(std::move(mentioned), n_objects);
  }
}

std::vector<std::pair<Condition, double>> ConditionPrior::enumerate(int n_objects) const {
  if (n_objects > 16) throw std::invalid_argument("condition enumeration limited to 16 objects");
  std::vector<std::pair<Condition, double>> out;
  double total = 0.0;
  const unsigned n_masks = 1u << n_objects;
  for (unsigned mask = 0; mask < n_masks; ++mask) {
    if (mask == 0 && !allow_empty) continue;
    std::vector<int> mentioned;
    double prob = 1.0;
    for (int i = 0; i < n_objects; ++i) {
      if (mask & (1u << i)) {
        mentioned.push_back(i);
        prob *= mention_prob;
      } else {
        prob *= 1.0 - mention_prob;
      }
    }
    total += prob;
    out.emplace_back(Condition(std::move(mentioned), n_objects), prob);
  }
  for (auto& [c, prob] : out) prob /= total;
  return out;
}

double uncond_noisy_log_density(const MixtureWorld& world, const ConditionPrior& prior,
                                Dist which, const Vec& x, double sigma) {
  const auto conditions = prior.enumerate(world.n_objects());
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(conditions.size());
  for (const auto& [c, prob] : conditions) {
    const double t = std::log(prob) + world.noisy_log_density(c, which, x, sigma);
    terms.push_back(t);
    m = std::max(m, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

Vec uncond_noisy_score(const MixtureWorld& world, const ConditionPrior& prior,
                       Dist which, const Vec& x, double sigma) {
  const auto conditions = prior.enumerate(world.n_objects());
  std::vector<double> logs;
  logs.reserve(conditions.size());
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& [c, prob] : conditions) {
    const double t = std::log(prob) + world.noisy_log_density(c, which, x, sigma);
    logs.push_back(t);
    m = std::max(m, t);
  }
  double z = 0.0;
  for (double t : logs) z += std::exp(t - m);
  Vec score(x.size(), 0.0);
  for (std::size_t j = 0; j < conditions.size(); ++j) {
    const double resp = std::exp(logs[j] - m) / z;
    const Vec sc = world.noisy_score(conditions[j].first, which, x, sigma);
    for (std::size_t d = 0; d < x.size(); ++d) score[d] += resp * sc[d];
  }
  return score;
}

}  // namespace pfd
