#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace pfd::rng {

// splitmix64 finalizer, doubling as the combiner for substream derivation.
inline uint64_t mix(uint64_t h, uint64_t v) {
  h += 0x9e3779b97f4a7c15ull + v;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

// Tags for the documented seed derivation tree:
// run seed -> condition -> particle -> step, plus auxiliary branches.
enum Branch : uint64_t {
  kCondition = 1,
  kParticle = 2,
  kStep = 3,
  kResample = 4,
  kInit = 5,
  kReference = 6,
  kTraining = 7,
  kWorld = 8,
  kKappa = 9,
  kPermutation = 10,
};

inline uint64_t derive(uint64_t root, std::initializer_list<uint64_t> path) {
  uint64_t h = mix(root, 0x5bf03635f0935ad1ull);
  for (uint64_t v : path) h = mix(h, v);
  return h;
}

// Deterministic uniform/gaussian stream over iterated splitmix64. Draws are
// bit-reproducible regardless of the standard library implementation, which
// the report reproducibility contract depends on.
class Stream {
 public:
  explicit Stream(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with cached spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  void fill_gaussian(std::span<double> out) {
    for (double& v : out) v = gaussian();
  }

  std::vector<double> gaussian_vec(std::size_t n) {
    std::vector<double> v(n);
    fill_gaussian(v);
    return v;
  }

  // Fisher-Yates over indices [0,n); used by the permutation test.
  void shuffle(std::span<int> idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(idx[i - 1], idx[j]);
    }
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pfd::rng
