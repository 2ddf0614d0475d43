#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dapt {

// Mixing step of splitmix64; used to derive independent seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG. The engine is the standard-specified mt19937_64; all
// conversions to doubles and bounded ints are spelled out here so that
// streams are bit-identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed), seed_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is ~n/2^64; determinism is what
  // matters here.
  uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  // Box-Muller without a cached spare.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Normal(0, stddev) resampled until within +-cut standard deviations.
  double truncated_normal(double stddev, double cut = 2.0) {
    double z = normal();
    while (std::abs(z) > cut) z = normal();
    return z * stddev;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent stream derived from the construction seed, not the current
  // engine state, so forks do not depend on how much of this stream was used.
  Rng fork(uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

 private:
  std::mt19937_64 eng_;
  uint64_t seed_;
};

}  // namespace dapt
