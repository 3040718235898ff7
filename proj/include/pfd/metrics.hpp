#pragma once

#include <span>
#include <vector>

#include "pfd/toyworld.hpp"

namespace pfd {

struct OccurrenceReport {
  double mean = 0.0;                  // average over conditions of per-condition fractions
  std::vector<double> per_object;     // detection rate per object where mentioned
  std::vector<double> per_condition;  // fraction of mentioned objects detected
  int n_conditions = 0;
};

// Fraction of mentioned objects whose detector output on the paired sample
// clears the threshold, per condition, averaged over conditions. Conditions
// with an empty mention set are skipped.
OccurrenceReport occurrence_rate(const std::vector<Vec>& samples,
                                 const std::vector<Condition>& conditions,
                                 const MixtureWorld& detector, double threshold = 0.5);

struct FrechetScore {
  double value = 0.0;
  int n_gen = 0;
  int n_ref = 0;
  Vec mean_gen;
  Vec mean_ref;
  bool regularized = false;  // a rank-deficient covariance was ridged
};

// |mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}) on raw coordinates, Gaussian
// fits with unbiased covariance, matrix roots by symmetric eigendecomposition.
FrechetScore frechet_distance(const std::vector<Vec>& gen, const std::vector<Vec>& ref);

// 0.5 * sum |p - q| for two probability vectors.
double tv_distance(std::span<const double> p_vec, std::span<const double> q_vec);

// (sum w)^2 / sum w^2.
double ess(std::span<const double> weights);

struct EnergyTestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n_permutations = 0;
};

// Two-sample energy-distance test with a permutation null.
EnergyTestResult energy_distance_test(const std::vector<Vec>& a, const std::vector<Vec>& b,
                                      int n_permutations, uint64_t seed);

}  // namespace pfd
