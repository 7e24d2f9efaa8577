#pragma once

#include <cstdint>
#include <vector>

namespace picnet {

// Deterministic xoshiro256** generator seeded through splitmix64.
// Every stochastic choice in the project (parameter init, shuffles,
// synthetic data) flows through this generator so that a seed pins the
// entire run. Draws use only integer ops, sqrt and log, keeping the
// stream stable for a given binary.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via the Marsaglia polar method (second draw cached).
  double normal();
  double normal(double mean, double stddev);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      std::int64_t j = uniform_int(0, i);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  // Stable derivation of a substream seed, used e.g. for per-epoch
  // shuffle orders so a resumed run replays the exact same permutations.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace picnet
