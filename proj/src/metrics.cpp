#include "pfd/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "pfd/rng.hpp"

namespace pfd {

OccurrenceReport occurrence_rate(const std::vector<Vec>& samples,
                                 const std::vector<Condition>& conditions,
                                 const MixtureWorld& detector, double threshold) {
  if (samples.empty()) throw std::invalid_argument("occurrence_rate: empty input");
  if (samples.size() != conditions.size())
    throw std::invalid_argument("occurrence_rate: every sample needs a condition");

  OccurrenceReport rep;
  std::vector<int> object_hits(static_cast<std::size_t>(detector.n_objects()), 0);
  std::vector<int> object_mentions(static_cast<std::size_t>(detector.n_objects()), 0);
  double mean_acc = 0.0;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const Condition& c = conditions[r];
    if (c.empty()) continue;
    int hits = 0;
    for (int i : c.mentioned()) {
      const bool hit = detector.detect_object(samples[r], i) >= threshold;
      hits += hit ? 1 : 0;
      ++object_mentions[static_cast<std::size_t>(i)];
      object_hits[static_cast<std::size_t>(i)] += hit ? 1 : 0;
    }
    rep.per_condition.push_back(static_cast<double>(hits) / static_cast<double>(c.mentioned().size()));
    mean_acc += rep.per_condition.back();
    ++rep.n_conditions;
  }
  if (rep.n_conditions == 0) throw std::invalid_argument("occurrence_rate: no conditional samples");
  rep.mean = mean_acc / rep.n_conditions;
  rep.per_object.resize(object_hits.size(), 0.0);
  for (std::size_t i = 0; i < object_hits.size(); ++i) {
    rep.per_object[i] = object_mentions[i] > 0
                            ? static_cast<double>(object_hits[i]) / object_mentions[i]
                            : 0.0;
  }
  return rep;
}

namespace {

// Symmetric PSD square root via eigendecomposition, clipping tiny negative
// eigenvalues born of roundoff.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(ev[i], 0.0));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments fit_gaussian(const std::vector<Vec>& samples, int d) {
  const int n = static_cast<int>(samples.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const Vec& x : samples) {
    for (int j = 0; j < d; ++j) mean[j] += x[static_cast<std::size_t>(j)];
  }
  mean /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const Vec& x : samples) {
    Eigen::VectorXd delta(d);
    for (int j = 0; j < d; ++j) delta[j] = x[static_cast<std::size_t>(j)] - mean[j];
    cov.noalias() += delta * delta.transpose();
  }
  cov /= static_cast<double>(n - 1);
  return {std::move(mean), std::move(cov)};
}

}  // namespace

FrechetScore frechet_distance(const std::vector<Vec>& gen, const std::vector<Vec>& ref) {
  if (gen.empty() || ref.empty()) throw std::invalid_argument("frechet_distance: empty sample set");
  const int d = static_cast<int>(gen.front().size());
  if (static_cast<int>(ref.front().size()) != d)
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  if (static_cast<int>(gen.size()) < d + 1 || static_cast<int>(ref.size()) < d + 1)
    throw std::invalid_argument("frechet_distance: need at least d+1 samples per set");

  Moments a = fit_gaussian(gen, d);
  Moments b = fit_gaussian(ref, d);

  FrechetScore score;
  score.n_gen = static_cast<int>(gen.size());
  score.n_ref = static_cast<int>(ref.size());
  score.mean_gen.assign(a.mean.data(), a.mean.data() + d);
  score.mean_ref.assign(b.mean.data(), b.mean.data() + d);

  constexpr double kRidge = 1e-8;
  auto rank_deficient = [&](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    return es.eigenvalues().minCoeff() < kRidge;
  };
  if (rank_deficient(a.cov) || rank_deficient(b.cov)) {
    score.regularized = true;
    a.cov += kRidge * Eigen::MatrixXd::Identity(d, d);
    b.cov += kRidge * Eigen::MatrixXd::Identity(d, d);
  }

  // Tr((S1 S2)^{1/2}) through the similar symmetric matrix A S2 A, A = S1^{1/2}.
  const Eigen::MatrixXd root_a = psd_sqrt(a.cov);
  const Eigen::MatrixXd inner = psd_sqrt(root_a * b.cov * root_a);

  const double mean_term = (a.mean - b.mean).squaredNorm();
  const double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * inner.trace();
  score.value = std::max(mean_term + trace_term, 0.0);
  return score;
}

double tv_distance(std::span<const double> p_vec, std::span<const double> q_vec) {
  if (p_vec.size() != q_vec.size()) throw std::invalid_argument("tv_distance: length mismatch");
  double sp = 0.0, sq = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < p_vec.size(); ++i) {
    sp += p_vec[i];
    sq += q_vec[i];
    acc += std::abs(p_vec[i] - q_vec[i]);
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("tv_distance: inputs must sum to 1");
  return 0.5 * acc;
}

double ess(std::span<const double> weights) {
  double sum = 0.0, sum_sq = 0.0;
  for (double w : weights) {
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("ess: weights sum to zero");
  return sum * sum / sum_sq;
}

EnergyTestResult energy_distance_test(const std::vector<Vec>& a, const std::vector<Vec>& b,
                                      int n_permutations, uint64_t seed) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("energy test: need >= 2 samples per set");
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  const int total = n + m;

  // Pool the points and cache all pairwise distances; permutations then
  // only reshuffle indices.
  std::vector<const Vec*> pool;
  pool.reserve(static_cast<std::size_t>(total));
  for (const Vec& x : a) pool.push_back(&x);
  for (const Vec& x : b) pool.push_back(&x);
  std::vector<double> dist(static_cast<std::size_t>(total) * total, 0.0);
  for (int i = 0; i < total; ++i) {
    for (int j = i + 1; j < total; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < pool[static_cast<std::size_t>(i)]->size(); ++k) {
        const double diff = (*pool[static_cast<std::size_t>(i)])[k] - (*pool[static_cast<std::size_t>(j)])[k];
        s += diff * diff;
      }
      const double v = std::sqrt(s);
      dist[static_cast<std::size_t>(i) * total + j] = v;
      dist[static_cast<std::size_t>(j) * total + i] = v;
    }
  }

  auto statistic = [&](const std::vector<int>& idx) {
    double cross = 0.0, within_a = 0.0, within_b = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j)
        cross += dist[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * total +
                      idx[static_cast<std::size_t>(n + j)]];
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j)
        within_a += dist[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * total +
                         idx[static_cast<std::size_t>(j)]];
    }
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j)
        within_b += dist[static_cast<std::size_t>(idx[static_cast<std::size_t>(n + i)]) * total +
                         idx[static_cast<std::size_t>(n + j)]];
    }
    return 2.0 * cross / (static_cast<double>(n) * m) -
           2.0 * within_a / (static_cast<double>(n) * n) -
           2.0 * within_b / (static_cast<double>(m) * m);
  };

  std::vector<int> idx(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
  EnergyTestResult res;
  res.statistic = statistic(idx);
  res.n_permutations = n_permutations;

  rng::Stream stream(rng::derive(seed, {rng::kPermutation}));
  int at_least = 1;  // the identity permutation counts
  for (int p = 0; p < n_permutations; ++p) {
    stream.shuffle(idx);
    if (statistic(idx) >= res.statistic) ++at_least;
  }
  res.p_value = static_cast<double>(at_least) / static_cast<double>(n_permutations + 1);
  return res;
}

}  // namespace pfd
