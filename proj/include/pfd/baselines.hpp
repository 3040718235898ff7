#pragma once

#include <functional>
#include <vector>

#include "pfd/correction.hpp"
#include "pfd/sampler.hpp"
#include "pfd/toyworld.hpp"

namespace pfd {

struct SelectionResult {
  enum class Criterion { ObjectOccurrence, LikelihoodRatio };
  int chosen_index = 0;
  std::vector<double> scores;
  Criterion criterion = Criterion::ObjectOccurrence;
  bool degenerate = false;  // empty mention set
};

// Pick the sample maximizing the product of detection probabilities over
// the mentioned objects. Ties break to the lowest index.
SelectionResult object_select(const std::vector<Vec>& finals, const Condition& c,
                              const MixtureWorld& detector);

// Pick the sample with the largest phi_0, i.e. importance selection at the
// end of generation.
SelectionResult d_select(const std::vector<Vec>& finals, const Condition& c,
                         const CorrectionEvaluator& correction_at_t0, int terminal_event);

using CorrectionGradient = std::function<Vec(const Vec& x, double sigma, const Condition& c)>;

// Model score plus the correction gradient, gated off above sigma_gate.
Vec d_guidance_score(const Vec& x, double sigma, const Condition& c, const ScoreProvider& base,
                     const CorrectionGradient& grad, double sigma_gate = 5.0);

// ScoreProvider wrapper applying d_guidance_score; denoising follows the
// Tweedie identity of the modified score so the provider stays consistent.
class GuidedScoreProvider : public ScoreProvider {
 public:
  GuidedScoreProvider(const ScoreProvider& base, CorrectionGradient grad, double sigma_gate = 5.0)
      : base_(&base), grad_(std::move(grad)), sigma_gate_(sigma_gate) {}

  int dim() const override { return base_->dim(); }

 protected:
  Vec do_score(const Vec& x, double sigma, const Condition& c) const override {
    return d_guidance_score(x, sigma, c, *base_, grad_, sigma_gate_);
  }

 private:
  const ScoreProvider* base_;
  CorrectionGradient grad_;
  double sigma_gate_;
};

// Exact correction gradient for a MixtureWorld: score of p minus score of q.
CorrectionGradient analytic_correction_gradient(const MixtureWorld& world);
// Gradient of a trained discriminator's logit.
CorrectionGradient learned_correction_gradient(const Discriminator& disc);

}  // namespace pfd
