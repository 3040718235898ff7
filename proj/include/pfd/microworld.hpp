#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pfd {

// Small discrete state-space chain for verifying the resampling-weight
// identity exactly: a proposal chain q running backwards from X_T to X_0
// plus arbitrary full-support target marginals p_t. With phi_t = p_t/q_t
// the filtered marginal must reproduce p_t at every step.
struct DiscreteMicroWorld {
  int n_states = 3;
  int horizon = 3;
  // q_transitions[t][from][to] = q(X_t = to | X_{t+1} = from), t = 0..T-1.
  std::vector<std::vector<std::vector<double>>> q_transitions;
  std::vector<double> q_prior;                   // distribution of X_T
  std::vector<std::vector<double>> p_marginals;  // p_t for t = 0..T

  void validate() const;

  // Marginal of the proposal chain at time t (t=T gives the prior).
  std::vector<double> q_marginal(int t) const;

  // phi_t = p_t / q_t, elementwise.
  std::vector<double> phi(int t) const;

  static DiscreteMicroWorld random(int n_states, int horizon, uint64_t seed);

  std::string to_json() const;
  static DiscreteMicroWorld from_json(const std::string& text);
};

// Filtered marginal v(X_t) from the weight recursion
// v_t ∝ sum_{x_{t+1}} v_{t+1} q(x_t|x_{t+1}) phi_t(x_t)/phi_{t+1}(x_{t+1}),
// evaluated exactly by dynamic programming over states.
std::vector<double> exact_pf_target(const DiscreteMicroWorld& micro, int t);

// Same marginal by brute-force enumeration of every trajectory x_T..x_t,
// multiplying the per-step resampling weights along the path. Exists as an
// independent route to the same quantity.
std::vector<double> enumerate_pf_target(const DiscreteMicroWorld& micro, int t);

}  // namespace pfd
