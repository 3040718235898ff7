#include "pfd/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pfd {

namespace {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double binary_cross_entropy(double p, bool real) {
  constexpr double kTiny = 1e-12;
  return real ? -std::log(std::max(p, kTiny)) : -std::log(std::max(1.0 - p, kTiny));
}

}  // namespace

Vec DiscFeatureMap::operator()(const Vec& x, double sigma, const Condition& c) const {
  if (static_cast<int>(x.size()) != 2 * n_objects_)
    throw std::invalid_argument("discriminator features: dimension mismatch");
  Vec f;
  f.reserve(static_cast<std::size_t>(n_features()));
  for (int s = 0; s < n_objects_; ++s) {
    const double u = x[static_cast<std::size_t>(2 * s)];
    const double v = x[static_cast<std::size_t>(2 * s) + 1];
    f.push_back(u);
    f.push_back(v);
    f.push_back(u * u);
    f.push_back(v * v);
    f.push_back(u * v);
  }
  f.push_back(std::log1p(sigma));
  if (conditional_) {
    for (int i = 0; i < n_objects_; ++i) f.push_back(c.mentions(i) ? 1.0 : 0.0);
  }
  return f;
}

void DiscFeatureMap::accumulate_logit_gradient(const Vec& x, const Vec& weights, Vec& grad_out) const {
  // Only the per-slot monomials depend on x.
  for (int s = 0; s < n_objects_; ++s) {
    const double u = x[static_cast<std::size_t>(2 * s)];
    const double v = x[static_cast<std::size_t>(2 * s) + 1];
    const double* w = weights.data() + 5 * s;
    grad_out[static_cast<std::size_t>(2 * s)] += w[0] + 2.0 * w[2] * u + w[4] * v;
    grad_out[static_cast<std::size_t>(2 * s) + 1] += w[1] + 2.0 * w[3] * v + w[4] * u;
  }
}

Discriminator::Discriminator(DiscFeatureMap features, Vec weights, double bias)
    : features_(features), weights_(std::move(weights)), bias_(bias) {
  if (static_cast<int>(weights_.size()) != features_.n_features())
    throw std::invalid_argument("discriminator: weight count does not match feature map");
}

double Discriminator::logit(const Vec& x, double sigma, const Condition& c) const {
  const Vec f = features_(x, sigma, c);
  return std::inner_product(f.begin(), f.end(), weights_.begin(), bias_);
}

double Discriminator::value(const Vec& x, double sigma, const Condition& c) const {
  const double d = logistic(logit(x, sigma, c));
  constexpr double kEps = 1e-15;
  return std::clamp(d, kEps, 1.0 - kEps);
}

Vec Discriminator::logit_gradient_x(const Vec& x, double sigma, const Condition& c) const {
  (void)sigma;
  (void)c;
  Vec grad(x.size(), 0.0);
  features_.accumulate_logit_gradient(x, weights_, grad);
  return grad;
}

TrainResult train_discriminator(const std::vector<LabeledExample>& dataset,
                                const NoiseSchedule& schedule, bool conditional,
                                const TrainOptions& opts, rng::Stream& stream) {
  if (dataset.size() < 2) throw std::runtime_error("discriminator training: dataset too small");
  const std::size_t n_real = static_cast<std::size_t>(
      std::count_if(dataset.begin(), dataset.end(), [](const LabeledExample& e) { return e.real; }));
  if (n_real == 0 || n_real == dataset.size())
    throw std::runtime_error("discriminator training: degenerate data, all examples in one class");

  const int n_objects = static_cast<int>(dataset.front().x0.size()) / 2;
  const DiscFeatureMap fmap(n_objects, conditional);
  const std::size_t n_feat = static_cast<std::size_t>(fmap.n_features());

  // Noise each clean example at a uniformly sampled time, then featurize.
  struct Row {
    Vec f;
    bool real;
  };
  std::vector<Row> rows;
  rows.reserve(dataset.size());
  for (const LabeledExample& e : dataset) {
    const double t = stream.uniform(opts.t_lo, opts.t_hi);
    const double sigma = sigma_of_t(schedule, t);
    Vec xt = e.x0;
    for (double& v : xt) v += sigma * stream.gaussian();
    rows.push_back({fmap(xt, sigma, e.c), e.real});
  }

  const std::size_t n_held = std::min(rows.size() - 2, static_cast<std::size_t>(
                                 std::floor(opts.heldout_fraction * static_cast<double>(rows.size()))));
  std::vector<int> order(static_cast<std::size_t>(rows.size()));
  std::iota(order.begin(), order.end(), 0);
  stream.shuffle(order);
  const std::size_t n_train = rows.size() - n_held;

  // Standardize features over the training split; folded back at the end.
  Vec mean(n_feat, 0.0), sdev(n_feat, 0.0);
  for (std::size_t r = 0; r < n_train; ++r) {
    const Vec& f = rows[static_cast<std::size_t>(order[r])].f;
    for (std::size_t j = 0; j < n_feat; ++j) mean[j] += f[j];
  }
  for (double& m : mean) m /= static_cast<double>(n_train);
  for (std::size_t r = 0; r < n_train; ++r) {
    const Vec& f = rows[static_cast<std::size_t>(order[r])].f;
    for (std::size_t j = 0; j < n_feat; ++j) sdev[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  }
  for (double& s : sdev) s = std::max(std::sqrt(s / static_cast<double>(n_train)), 1e-8);

  Vec w(n_feat, 0.0);
  double bias = 0.0;
  double train_loss = 0.0;
  const int batch = std::max(1, opts.batch_size);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    // Fresh pass order each epoch over the training split.
    std::vector<int> pass(order.begin(), order.begin() + static_cast<long>(n_train));
    stream.shuffle(pass);
    train_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(batch)) {
      const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(batch));
      Vec grad_w(n_feat, 0.0);
      double grad_b = 0.0;
      for (std::size_t r = start; r < stop; ++r) {
        const Row& row = rows[static_cast<std::size_t>(pass[r])];
        double z = bias;
        for (std::size_t j = 0; j < n_feat; ++j) z += w[j] * (row.f[j] - mean[j]) / sdev[j];
        const double p = logistic(z);
        train_loss += binary_cross_entropy(p, row.real);
        const double err = p - (row.real ? 1.0 : 0.0);
        for (std::size_t j = 0; j < n_feat; ++j) grad_w[j] += err * (row.f[j] - mean[j]) / sdev[j];
        grad_b += err;
      }
      const double scale = opts.learning_rate / static_cast<double>(stop - start);
      for (std::size_t j = 0; j < n_feat; ++j) w[j] -= scale * grad_w[j];
      bias -= scale * grad_b;
    }
    train_loss /= static_cast<double>(n_train);
  }

  // Fold the standardization into plain-feature weights.
  Vec w_plain(n_feat);
  double b_plain = bias;
  for (std::size_t j = 0; j < n_feat; ++j) {
    w_plain[j] = w[j] / sdev[j];
    b_plain -= w[j] * mean[j] / sdev[j];
  }
  Discriminator disc(fmap, std::move(w_plain), b_plain);

  double held_loss = 0.0, held_acc = 0.0;
  if (n_held > 0) {
    for (std::size_t r = n_train; r < rows.size(); ++r) {
      const Row& row = rows[static_cast<std::size_t>(order[r])];
      double z = disc.bias();
      for (std::size_t j = 0; j < n_feat; ++j) z += disc.weights()[j] * row.f[j];
      const double p = logistic(z);
      held_loss += binary_cross_entropy(p, row.real);
      held_acc += ((p >= 0.5) == row.real) ? 1.0 : 0.0;
    }
    held_loss /= static_cast<double>(n_held);
    held_acc /= static_cast<double>(n_held);
  }
  return {std::move(disc), train_loss, held_loss, held_acc};
}

TrainResult train_discriminator(const ExampleSampler& real, const ExampleSampler& fake,
                                const NoiseSchedule& schedule, bool conditional, int n_objects,
                                const TrainOptions& opts, rng::Stream& stream) {
  if (opts.n_samples < 1000)
    throw std::invalid_argument("discriminator training: need at least 1000 samples per class");
  (void)n_objects;
  std::vector<LabeledExample> dataset;
  dataset.reserve(2 * static_cast<std::size_t>(opts.n_samples));
  for (int i = 0; i < opts.n_samples; ++i) {
    auto [xr, cr] = real(stream);
    dataset.push_back({std::move(xr), std::move(cr), true});
    auto [xf, cf] = fake(stream);
    dataset.push_back({std::move(xf), std::move(cf), false});
  }
  return train_discriminator(dataset, schedule, conditional, opts, stream);
}

}  // namespace pfd
