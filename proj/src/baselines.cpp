#include "pfd/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace pfd {

namespace {

int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    if (scores[static_cast<std::size_t>(i)] > scores[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace

SelectionResult object_select(const std::vector<Vec>& finals, const Condition& c,
                              const MixtureWorld& detector) {
  if (finals.empty()) throw std::invalid_argument("object_select: no samples");
  SelectionResult res;
  res.criterion = SelectionResult::Criterion::ObjectOccurrence;
  res.scores.resize(finals.size(), 1.0);
  if (c.empty()) {
    res.degenerate = true;
    res.chosen_index = 0;
    return res;
  }
  for (std::size_t k = 0; k < finals.size(); ++k) {
    double score = 1.0;
    for (int i : c.mentioned()) score *= detector.detect_object(finals[k], i);
    res.scores[k] = score;
  }
  res.chosen_index = argmax_lowest(res.scores);
  return res;
}

SelectionResult d_select(const std::vector<Vec>& finals, const Condition& c,
                         const CorrectionEvaluator& correction_at_t0, int terminal_event) {
  if (finals.empty()) throw std::invalid_argument("d_select: no samples");
  SelectionResult res;
  res.criterion = SelectionResult::Criterion::LikelihoodRatio;
  res.scores.resize(finals.size());
  for (std::size_t k = 0; k < finals.size(); ++k) {
    res.scores[k] = correction_at_t0.phi(finals[k], 0.0, c, terminal_event);
  }
  res.chosen_index = argmax_lowest(res.scores);
  return res;
}

Vec d_guidance_score(const Vec& x, double sigma, const Condition& c, const ScoreProvider& base,
                     const CorrectionGradient& grad, double sigma_gate) {
  Vec s = base.score(x, sigma, c);
  if (sigma < sigma_gate) {
    const Vec g = grad(x, sigma, c);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += g[i];
  }
  return s;
}

CorrectionGradient analytic_correction_gradient(const MixtureWorld& world) {
  return [&world](const Vec& x, double sigma, const Condition& c) {
    Vec g = world.noisy_score(c, Dist::P, x, sigma);
    const Vec q = world.noisy_score(c, Dist::Q, x, sigma);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= q[i];
    return g;
  };
}

CorrectionGradient learned_correction_gradient(const Discriminator& disc) {
  return [&disc](const Vec& x, double sigma, const Condition& c) {
    return disc.logit_gradient_x(x, sigma, c);
  };
}

}  // namespace pfd
