#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pfd/rng.hpp"
#include "pfd/schedule.hpp"
#include "pfd/toyworld.hpp"

namespace pfd {

// Feature map for the logistic real/fake model: per-slot quadratic
// monomials (u, v, u^2, v^2, uv), log(1+sigma), and per-object mention
// indicators when conditional.
class DiscFeatureMap {
 public:
  DiscFeatureMap(int n_objects, bool conditional)
      : n_objects_(n_objects), conditional_(conditional) {}

  int n_objects() const { return n_objects_; }
  bool conditional() const { return conditional_; }
  int n_features() const { return 5 * n_objects_ + 1 + (conditional_ ? n_objects_ : 0); }

  Vec operator()(const Vec& x, double sigma, const Condition& c) const;
  // d(feature)/dx, needed for guidance gradients; column-major per feature.
  void accumulate_logit_gradient(const Vec& x, const Vec& weights, Vec& grad_out) const;

 private:
  int n_objects_;
  bool conditional_;
};

class Discriminator {
 public:
  Discriminator(DiscFeatureMap features, Vec weights, double bias);

  double logit(const Vec& x, double sigma, const Condition& c) const;
  // Output strictly inside (0,1).
  double value(const Vec& x, double sigma, const Condition& c) const;
  Vec logit_gradient_x(const Vec& x, double sigma, const Condition& c) const;

  bool conditional() const { return features_.conditional(); }
  const DiscFeatureMap& features() const { return features_; }
  const Vec& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  DiscFeatureMap features_;
  Vec weights_;
  double bias_;
};

struct TrainOptions {
  int n_samples = 8000;  // per class
  int epochs = 2;
  int batch_size = 256;
  double learning_rate = 0.1;
  double t_lo = 1e-5;  // uniform time sampling range
  double t_hi = 1.0;
  double heldout_fraction = 0.2;
};

struct TrainResult {
  Discriminator discriminator;
  double final_train_loss = 0.0;
  double heldout_loss = 0.0;
  double heldout_accuracy = 0.0;
};

// One labeled example: clean sample, its condition, and the class label
// (true for draws from the data distribution p).
struct LabeledExample {
  Vec x0;
  Condition c;
  bool real = false;
};

using ExampleSampler = std::function<std::pair<Vec, Condition>(rng::Stream&)>;

// Minimizes the canonical discrimination cross-entropy over noised pairs:
// each example is noised at a uniformly sampled time before featurization.
// Minibatch gradient descent on the logistic model; features standardized
// internally and the scaling folded back into the returned weights.
TrainResult train_discriminator(const std::vector<LabeledExample>& dataset,
                                const NoiseSchedule& schedule, bool conditional,
                                const TrainOptions& opts, rng::Stream& stream);

// Convenience wrapper drawing n_samples per class from the two samplers.
TrainResult train_discriminator(const ExampleSampler& real, const ExampleSampler& fake,
                                const NoiseSchedule& schedule, bool conditional, int n_objects,
                                const TrainOptions& opts, rng::Stream& stream);

}  // namespace pfd
