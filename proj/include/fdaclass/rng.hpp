#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace fdaclass {

// Deterministic random stream. All variate transforms are implemented here
// rather than with std::*_distribution so that a given seed produces the
// same sequence on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // splitmix64 chain over (master, stream, substream); used to give
  // independent seeds to replications, folds and retries. The state is
  // diffused before each component enters, so (master, stream) pairs with
  // equal sums do not collide.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream,
                              std::uint64_t substream = 0) {
    std::uint64_t z = mix(master);
    z = mix(z ^ (stream + 0x9e3779b97f4a7c15ULL));
    z = mix(z ^ (substream + 0xbf58476d1ce4e5b9ULL));
    return z;
  }

  std::uint64_t next_u64() { return engine_(); }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller (one variate per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Exponential with rate 1.
  double exponential() { return -std::log(1.0 - uniform()); }

  // Unbiased integer in [0, n).
  int uniform_int(int n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return static_cast<int>(r % bound);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (int i = static_cast<int>(xs.size()) - 1; i > 0; --i) {
      const int j = uniform_int(i + 1);
      std::swap(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fdaclass
