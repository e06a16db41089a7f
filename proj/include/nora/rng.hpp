#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "nora/matrix.hpp"

namespace nora {

/// xoshiro256** (Blackman & Vigna, public domain), seeded by expanding a
/// 64-bit seed through SplitMix64. The integer stream is identical on every
/// platform; normal deviates use the Marsaglia polar method.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent generator for a named purpose ("task", "init", "minibatch").
  static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept;
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Matrix with i.i.d. N(0, stddev^2) entries.
Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);
/// Matrix with i.i.d. U[lo, hi) entries.
Matrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi);

}  // namespace nora
