#include <gtest/gtest.h>

#include <vector>

#include "nora/kernels.hpp"
#include "nora/rng.hpp"

namespace k = nora::kernels;
using nora::BasicMatrix;

namespace {

template <typename T>
BasicMatrix<T> rand_mat(std::size_t r, std::size_t c, nora::Rng& rng) {
  return nora::random_normal(r, c, rng).cast<T>();
}

template <typename T>
void expect_kernels_bitwise(std::size_t r, std::size_t c, std::uint64_t seed) {
  nora::Rng rng(seed);
  auto x = rand_mat<T>(r, c, rng);
  auto w = rand_mat<T>(r, c, rng);
  for (std::size_t j = 0; j < c; ++j) w(r / 2, j) = T{0};
  for (std::size_t j = 0; j < c; ++j) x(r / 3, j) = T{3} * w(r / 3, j);

  std::vector<T> a(r), b(r);
  k::serial::row_dot(x, w, std::span<T>(a));
  k::parallel::row_dot(x, w, std::span<T>(b));
  EXPECT_EQ(a, b);
  k::serial::row_sqnorm(x, std::span<T>(a));
  k::parallel::row_sqnorm(x, std::span<T>(b));
  EXPECT_EQ(a, b);

  BasicMatrix<T> ps(r, c), pp(r, c);
  const auto zs = k::serial::row_perp_project(x, w, ps);
  const auto zp = k::parallel::row_perp_project(x, w, pp);
  EXPECT_EQ(ps, pp);
  EXPECT_EQ(zs, 1u);
  EXPECT_EQ(zp, 1u);

  k::serial::row_normalize(x, T{0}, ps);
  k::parallel::row_normalize(x, T{0}, pp);
  EXPECT_EQ(ps, pp);

  EXPECT_EQ(k::serial::norm_fro(x), k::parallel::norm_fro(x));
  EXPECT_EQ(k::serial::norm_12(x), k::parallel::norm_12(x));
  EXPECT_EQ(k::serial::norm_inf2(x), k::parallel::norm_inf2(x));

  BasicMatrix<T> ts(c, r), tp(c, r);
  k::serial::transpose(x, ts);
  k::parallel::transpose(x, tp);
  EXPECT_EQ(ts, tp);

  const auto b2 = rand_mat<T>(c, 17, rng);
  BasicMatrix<T> ms(r, 17), mp(r, 17);
  k::serial::matmul(x, b2, ms);
  k::parallel::matmul(x, b2, mp);
  EXPECT_EQ(ms, mp);
}

class KernelThreads : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { saved_ = k::parallel::max_threads(); k::parallel::set_threads(GetParam()); }
  void TearDown() override { k::parallel::set_threads(saved_); }
  int saved_ = 1;
};

}  // namespace

TEST_P(KernelThreads, SerialAndParallelAgreeBitwiseF64) {
  expect_kernels_bitwise<double>(257, 131, 1);
  expect_kernels_bitwise<double>(1024, 300, 2);
  expect_kernels_bitwise<double>(3, 1, 3);
}

TEST_P(KernelThreads, SerialAndParallelAgreeBitwiseF32) {
  expect_kernels_bitwise<float>(257, 131, 4);
  expect_kernels_bitwise<float>(2048, 96, 5);
}

INSTANTIATE_TEST_SUITE_P(Threads, KernelThreads, ::testing::Values(1, 2, 4));

TEST(Kernels, ZeroWeightRowPassesThrough) {
  const nora::Matrix x{{2, 3}, {1, 1}};
  const nora::Matrix w{{1, 0}, {0, 0}};
  nora::Matrix out(2, 2);
  EXPECT_EQ(k::serial::row_perp_project(x, w, out), 1u);
  EXPECT_EQ(out, (nora::Matrix{{0, 3}, {1, 1}}));
}

TEST(Kernels, RoundingResidualFlushedToZero) {
  // x parallel to w up to rounding; the projection must be exactly zero.
  nora::Rng rng(9);
  const auto w = nora::random_normal(50, 1, rng);
  const auto x = nora::random_normal(50, 1, rng);
  nora::Matrix out(50, 1);
  k::serial::row_perp_project(x, w, out);
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Kernels, FlushToleranceScales) {
  EXPECT_DOUBLE_EQ(k::flush_tolerance<double>(4), 64 * std::numeric_limits<double>::epsilon());
  EXPECT_GT(k::flush_tolerance<float>(4), k::flush_tolerance<double>(4));
}
