#pragma once
// Seeded random streams. Every distribution here is written out by hand so
// that a (seed, stream) pair produces the same numbers on any standard library.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace moyapred {

// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

// Child seed for a named stream, optionally indexed (fold, tree, grid cell...).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index = 0) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound); rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; one variate per call, the partner is discarded.
  double normal(double mean, double sd);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::mt19937_64 engine_;
};

// 0..n-1 in seeded random order.
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace moyapred
