#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lorasim::sim {

/// Seeded 64-bit generator. Independent streams are derived by label so that draws in one
/// component never perturb another component's sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::string_view label) const;

  std::uint64_t next_u64();
  /// Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  /// Uniform real in [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  double normal(double mean, double stddev);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lorasim::sim
