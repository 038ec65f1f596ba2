#pragma once

#include <cstdint>
#include <random>

namespace qrt {

/// SplitMix64 step. Used to derive independent generator seeds from a user
/// seed and a stream index.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seeded random stream over std::mt19937_64 (a bit-exact standard engine).
///
/// Stream `k` of seed `s` is seeded with the (k+1)-th output of SplitMix64
/// started at `s`. Uniform and normal draws are computed here rather than by
/// <random> distributions, whose algorithms are implementation-defined.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();

  /// Uniform integer on [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal by the Marsaglia polar method.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qrt
