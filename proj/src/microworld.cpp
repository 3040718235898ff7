#include "pfd/microworld.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "pfd/rng.hpp"

namespace pfd {

namespace {

void check_prob_vector(const std::vector<double>& v, int n, const char* what, bool full_support) {
  if (static_cast<int>(v.size()) != n) throw std::invalid_argument(std::string(what) + ": wrong length");
  double sum = 0.0;
  for (double p : v) {
    if (p < 0.0) throw std::invalid_argument(std::string(what) + ": negative entry");
    if (full_support && p <= 0.0) throw std::invalid_argument(std::string(what) + ": zero entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}

void normalize(std::vector<double>& v) {
  double sum = 0.0;
  for (double p : v) sum += p;
  for (double& p : v) p /= sum;
}

}  // namespace

void DiscreteMicroWorld::validate() const {
  if (n_states < 1 || n_states > 5) throw std::invalid_argument("micro-world: n_states must be in [1,5]");
  if (horizon < 1 || horizon > 4) throw std::invalid_argument("micro-world: horizon must be in [1,4]");
  if (static_cast<int>(q_transitions.size()) != horizon)
    throw std::invalid_argument("micro-world: need one transition matrix per step");
  for (const auto& m : q_transitions) {
    if (static_cast<int>(m.size()) != n_states) throw std::invalid_argument("micro-world: transition matrix shape");
    for (const auto& row : m) check_prob_vector(row, n_states, "micro-world transition row", false);
  }
  check_prob_vector(q_prior, n_states, "micro-world q_prior", false);
  if (static_cast<int>(p_marginals.size()) != horizon + 1)
    throw std::invalid_argument("micro-world: need horizon+1 target marginals");
  for (const auto& p : p_marginals) check_prob_vector(p, n_states, "micro-world p marginal", true);
  // The filter initializes with unit correction values, so its time-T
  // marginal is the proposal prior; the target must start there too (the
  // discrete analog of p and q sharing the pure-noise endpoint).
  for (int s = 0; s < n_states; ++s) {
    if (std::abs(p_marginals[static_cast<std::size_t>(horizon)][static_cast<std::size_t>(s)] -
                 q_prior[static_cast<std::size_t>(s)]) > 1e-9)
      throw std::invalid_argument("micro-world: p_T must coincide with the proposal prior");
  }
  // phi must be finite wherever the chain puts mass, so q_t needs full
  // support too; enforce it on the prior and transition columns reachable.
  for (int t = 0; t <= horizon; ++t) {
    for (double q : q_marginal(t)) {
      if (q <= 0.0) throw std::invalid_argument("micro-world: proposal marginal lacks full support");
    }
  }
}

std::vector<double> DiscreteMicroWorld::q_marginal(int t) const {
  if (t < 0 || t > horizon) throw std::invalid_argument("q_marginal: time index out of range");
  std::vector<double> cur = q_prior;
  for (int s = horizon - 1; s >= t; --s) {
    std::vector<double> next(static_cast<std::size_t>(n_states), 0.0);
    for (int from = 0; from < n_states; ++from) {
      for (int to = 0; to < n_states; ++to) {
        next[to] += cur[from] * q_transitions[s][from][to];
      }
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> DiscreteMicroWorld::phi(int t) const {
  const std::vector<double> q = q_marginal(t);
  std::vector<double> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) out[i] = p_marginals[t][i] / q[i];
  return out;
}

DiscreteMicroWorld DiscreteMicroWorld::random(int n_states, int horizon, uint64_t seed) {
  rng::Stream stream(rng::derive(seed, {rng::kWorld}));
  auto random_simplex = [&](int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& p : v) p = 0.05 + stream.uniform();  // floor keeps phi well away from 1/0
    normalize(v);
    return v;
  };
  DiscreteMicroWorld w;
  w.n_states = n_states;
  w.horizon = horizon;
  w.q_prior = random_simplex(n_states);
  w.q_transitions.resize(static_cast<std::size_t>(horizon));
  for (auto& m : w.q_transitions) {
    m.resize(static_cast<std::size_t>(n_states));
    for (auto& row : m) row = random_simplex(n_states);
  }
  w.p_marginals.resize(static_cast<std::size_t>(horizon) + 1);
  for (auto& p : w.p_marginals) p = random_simplex(n_states);
  w.validate();
  return w;
}

std::vector<double> exact_pf_target(const DiscreteMicroWorld& micro, int t) {
  micro.validate();
  if (t < 0 || t > micro.horizon) throw std::invalid_argument("exact_pf_target: time index out of range");
  // v_T = q_prior with phi_T = 1 by initialization.
  std::vector<double> v = micro.q_prior;
  std::vector<double> phi_prev(static_cast<std::size_t>(micro.n_states), 1.0);
  for (int s = micro.horizon - 1; s >= t; --s) {
    const std::vector<double> phi_s = micro.phi(s);
    std::vector<double> next(static_cast<std::size_t>(micro.n_states), 0.0);
    for (int from = 0; from < micro.n_states; ++from) {
      for (int to = 0; to < micro.n_states; ++to) {
        next[to] += v[from] * micro.q_transitions[s][from][to] * phi_s[to] / phi_prev[from];
      }
    }
    normalize(next);
    v = std::move(next);
    phi_prev = phi_s;
  }
  return v;
}

std::vector<double> enumerate_pf_target(const DiscreteMicroWorld& micro, int t) {
  micro.validate();
  if (t < 0 || t > micro.horizon) throw std::invalid_argument("enumerate_pf_target: time index out of range");
  const int n_steps = micro.horizon - t;
  std::vector<std::vector<double>> phis(static_cast<std::size_t>(micro.horizon) + 1);
  phis[static_cast<std::size_t>(micro.horizon)].assign(static_cast<std::size_t>(micro.n_states), 1.0);
  for (int s = micro.horizon - 1; s >= t; --s) phis[static_cast<std::size_t>(s)] = micro.phi(s);

  std::vector<double> out(static_cast<std::size_t>(micro.n_states), 0.0);
  // Path encoded as base-n_states digits, most significant = state at T.
  long total_paths = 1;
  for (int i = 0; i <= n_steps; ++i) total_paths *= micro.n_states;
  for (long code = 0; code < total_paths; ++code) {
    long rest = code;
    std::vector<int> states(static_cast<std::size_t>(n_steps) + 1);
    for (int i = n_steps; i >= 0; --i) {
      states[static_cast<std::size_t>(i)] = static_cast<int>(rest % micro.n_states);
      rest /= micro.n_states;
    }
    // states[0] is x_T, states[k] is x_{T-k}.
    double mass = micro.q_prior[static_cast<std::size_t>(states[0])];
    for (int k = 0; k < n_steps; ++k) {
      const int time = micro.horizon - 1 - k;
      const int from = states[static_cast<std::size_t>(k)];
      const int to = states[static_cast<std::size_t>(k) + 1];
      mass *= micro.q_transitions[time][from][to] *
              phis[static_cast<std::size_t>(time)][static_cast<std::size_t>(to)] /
              phis[static_cast<std::size_t>(time) + 1][static_cast<std::size_t>(from)];
    }
    out[static_cast<std::size_t>(states.back())] += mass;
  }
  normalize(out);
  return out;
}

std::string DiscreteMicroWorld::to_json() const {
  nlohmann::json j;
  j["n_states"] = n_states;
  j["horizon"] = horizon;
  j["q_transitions"] = q_transitions;
  j["q_prior"] = q_prior;
  j["p_marginals"] = p_marginals;
  return j.dump(2);
}

DiscreteMicroWorld DiscreteMicroWorld::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  DiscreteMicroWorld w;
  w.n_states = j.at("n_states").get<int>();
  w.horizon = j.at("horizon").get<int>();
  w.q_transitions = j.at("q_transitions").get<std::vector<std::vector<std::vector<double>>>>();
  w.q_prior = j.at("q_prior").get<std::vector<double>>();
  w.p_marginals = j.at("p_marginals").get<std::vector<std::vector<double>>>();
  w.validate();
  return w;
}

}  // namespace pfd
