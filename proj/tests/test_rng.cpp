#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "nora/rng.hpp"

using nora::Rng;

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// Straight transcription of the published xoshiro256** and SplitMix64.
struct RefXoshiro {
  std::array<std::uint64_t, 4> s;
  explicit RefXoshiro(std::uint64_t seed) {
    for (auto& w : s) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      w = z ^ (z >> 31);
    }
  }
  std::uint64_t next() {
    const std::uint64_t r = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return r;
  }
};

}  // namespace

TEST(Rng, SplitMixKnownValue) {
  std::uint64_t st = 0;
  EXPECT_EQ(nora::splitmix64(st), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(nora::splitmix64(st), 0x6e789e6aa1b965f4ULL);
}

TEST(Rng, MatchesReferenceStream) {
  for (std::uint64_t seed : {0ULL, 1ULL, 0xdeadbeefULL}) {
    Rng r(seed);
    RefXoshiro ref(seed);
    for (int k = 0; k < 1000; ++k) ASSERT_EQ(r.next_u64(), ref.next());
  }
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SubstreamsDifferByName) {
  Rng a = Rng::substream(7, "task");
  Rng b = Rng::substream(7, "init");
  Rng a2 = Rng::substream(7, "task");
  const auto x = a.next_u64();
  EXPECT_NE(x, b.next_u64());
  EXPECT_EQ(x, a2.next_u64());
}

TEST(Rng, UniformRangeAndMean) {
  Rng r(3);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, BelowIsUnbiased) {
  Rng r(5);
  std::array<int, 7> counts{};
  const int n = 70000;
  for (int k = 0; k < n; ++k) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7, 400);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 400000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int k = 0; k < n; ++k) {
    const double x = r.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
  EXPECT_NEAR(s4 / n, 3.0, 0.05);
}

TEST(Rng, RandomMatrixHelpers) {
  Rng r(1);
  const auto m = nora::random_normal(3, 4, r, 2.0);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.cols(), 4u);
  const auto u = nora::random_uniform(50, 50, r, -1.0, 2.0);
  for (double v : u.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LT(v, 2.0);
  }
}
