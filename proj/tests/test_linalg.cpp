#include <gtest/gtest.h>

#include <cmath>

#include "nora/linalg.hpp"
#include "nora/rng.hpp"
#include "oracles.hpp"

using nora::Matrix;
using nora::Rng;
using nora::test::max_abs_diff;

TEST(Projection, KillsRadialCoordinate) {
  const Matrix p = nora::row_perp_project(Matrix{{2, 3}}, Matrix{{1, 0}});
  EXPECT_EQ(p, (Matrix{{0, 3}}));
}

TEST(Projection, ParallelRowBecomesZero) {
  const Matrix w{{0.3, -1.7, 2.2}};
  const Matrix p = nora::row_perp_project(nora::scaled(w, 5.0), w);
  for (double v : p.values()) EXPECT_EQ(v, 0.0);
}

TEST(Projection, MatchesNaiveLoop) {
  Rng rng(1);
  const Matrix x = nora::random_normal(8, 4, rng);
  const Matrix w = nora::random_normal(8, 4, rng);
  EXPECT_LE(max_abs_diff(nora::row_perp_project(x, w), nora::test::naive_perp(x, w)), 1e-14);
}

TEST(Projection, ZeroWeightRowsCounted) {
  Matrix w{{1, 0}, {0, 0}, {0, 0}};
  std::size_t zeros = 0;
  const Matrix x{{1, 1}, {2, 3}, {4, 5}};
  const Matrix p = nora::row_perp_project(x, w, &zeros);
  EXPECT_EQ(zeros, 2u);
  EXPECT_EQ(p(1, 1), 3.0);
}

TEST(Projection, ShapeMismatchThrows) {
  EXPECT_THROW(nora::row_perp_project(Matrix(2, 3), Matrix(3, 2)), std::invalid_argument);
}

TEST(Projection, IdempotentAndNonExpansive) {
  Rng rng(2);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(6);
    const Matrix w = nora::random_normal(m, n, rng);
    const Matrix a = nora::random_normal(m, n, rng);
    const Matrix b = nora::random_normal(m, n, rng);
    const Matrix pa = nora::row_perp_project(a, w);
    const Matrix pb = nora::row_perp_project(b, w);
    ASSERT_LE(max_abs_diff(nora::row_perp_project(pa, w), pa), 1e-12);
    const Matrix d = nora::axpy(-1.0, b, a), pd = nora::axpy(-1.0, pb, pa);
    ASSERT_LE(nora::norm_fro(pd), nora::norm_fro(d) * (1 + 1e-12));
    ASSERT_LE(nora::norm_12(pd), nora::norm_12(d) * (1 + 1e-12));
    ASSERT_LE(nora::norm_inf2(pd), nora::norm_inf2(d) * (1 + 1e-12));
  }
}

TEST(RowNormalize, Basics) {
  const Matrix r = nora::row_normalize(Matrix{{3, 4}, {0, 0}, {0, 1}});
  EXPECT_DOUBLE_EQ(r(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(r(0, 1), 0.8);
  EXPECT_EQ(r(1, 0), 0.0);
  EXPECT_EQ(r(1, 1), 0.0);
  EXPECT_EQ(r(2, 1), 1.0);
}

TEST(RowNormalize, EpsThresholdZeroesSmallRows) {
  const Matrix r = nora::row_normalize(Matrix{{1e-6, 0}, {1, 0}}, 1e-3);
  EXPECT_EQ(r(0, 0), 0.0);
  EXPECT_EQ(r(1, 0), 1.0);
}

TEST(RowNormalize, ClampedVariant) {
  const Matrix r = nora::row_normalize_clamped(Matrix{{1e-6, 0}, {3, 4}}, 1e-3);
  EXPECT_DOUBLE_EQ(r(0, 0), 1e-3);
  EXPECT_DOUBLE_EQ(r(1, 1), 0.8);
}

TEST(RowNormalize, InnerProductEqualsNorm12) {
  Rng rng(3);
  const Matrix x = nora::random_normal(12, 7, rng);
  EXPECT_NEAR(nora::inner(x, nora::row_normalize(x)), nora::norm_12(x), 1e-12 * nora::norm_12(x));
}

TEST(Norms, Identity) {
  const Matrix i = Matrix::identity(5);
  EXPECT_DOUBLE_EQ(nora::norm_fro(i), std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(nora::norm_12(i), 5.0);
  EXPECT_DOUBLE_EQ(nora::norm_inf2(i), 1.0);
}

TEST(Norms, Zero) {
  const Matrix z(4, 3);
  EXPECT_EQ(nora::norm_fro(z), 0.0);
  EXPECT_EQ(nora::norm_12(z), 0.0);
  EXPECT_EQ(nora::norm_inf2(z), 0.0);
}

TEST(Norms, ChainAgainstScalarOracle) {
  Rng rng(4);
  const Matrix x = nora::random_normal(6, 9, rng);
  const auto e = nora::test::to_eigen(x);
  const double fro = e.norm();
  const double n12 = e.rowwise().norm().sum();
  const double ninf = e.rowwise().norm().maxCoeff();
  EXPECT_NEAR(nora::norm_fro(x), fro, 1e-13);
  EXPECT_NEAR(nora::norm_12(x), n12, 1e-13);
  EXPECT_NEAR(nora::norm_inf2(x), ninf, 1e-13);
  EXPECT_LE(ninf, fro);
  EXPECT_LE(fro, n12);
  EXPECT_LE(n12, std::sqrt(6.0) * fro);
}

TEST(Matmul, IdentityAndTranspose) {
  Rng rng(5);
  const Matrix a = nora::random_normal(4, 6, rng);
  EXPECT_EQ(nora::matmul(Matrix::identity(4), a), a);
  EXPECT_EQ(nora::transpose(nora::transpose(a)), a);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(6);
  const Matrix a = nora::random_normal(5, 7, rng);
  const Matrix b = nora::random_normal(7, 3, rng);
  EXPECT_LE(max_abs_diff(nora::matmul(a, b), nora::test::naive_matmul(a, b)), 1e-13);
}

TEST(Matmul, BackendsAgree) {
  Rng rng(7);
  const Matrix a = nora::random_normal(64, 200, rng);
  const Matrix b = nora::random_normal(200, 48, rng);
  const Matrix ref = nora::matmul(a, b);
  const Matrix fast = nora::matmul(a, b, nora::GemmBackend::blas);
  EXPECT_LE(max_abs_diff(ref, fast), 1e-11);
  const auto af = a.cast<float>(), bf = b.cast<float>();
  const auto rf = nora::matmul(af, bf), ff = nora::matmul(af, bf, nora::GemmBackend::blas);
  for (std::size_t k = 0; k < rf.size(); ++k) EXPECT_NEAR(rf.values()[k], ff.values()[k], 1e-3);
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(nora::matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
  EXPECT_THROW(nora::axpy(1.0, Matrix(2, 3), Matrix(3, 2)), std::invalid_argument);
  EXPECT_THROW(nora::hadamard(Matrix(2, 3), Matrix(3, 2)), std::invalid_argument);
  EXPECT_THROW(nora::row_dot(Matrix(2, 3), Matrix(3, 2)), std::invalid_argument);
}

TEST(Elementwise, AxpyHadamardRowDot) {
  const Matrix a{{1, 2}, {3, 4}}, b{{5, 6}, {7, 8}};
  EXPECT_EQ(nora::axpy(2.0, a, b), (Matrix{{7, 10}, {13, 16}}));
  EXPECT_EQ(nora::hadamard(a, b), (Matrix{{5, 12}, {21, 32}}));
  EXPECT_EQ(nora::row_dot(a, b), (std::vector<double>{17, 53}));
}

TEST(NewtonSchulz, IdentityIsFixedPoint) {
  for (int it : {1, 5, 20}) EXPECT_LE(max_abs_diff(nora::newton_schulz(Matrix::identity(6), it), Matrix::identity(6)), 1e-15);
}

TEST(NewtonSchulz, DiagonalFollowsScalarRecursion) {
  Matrix x(4, 4);
  for (int i = 0; i < 4; ++i) x(i, i) = 0.5;
  double s = 0.5;
  for (int k = 0; k < 5; ++k) s = 0.5 * s * (3.0 - s * s);
  const Matrix y = nora::newton_schulz(x, 5);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y(i, i), s, 1e-15);
}

TEST(NewtonSchulz, MatchesPolarFactor) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> sv(8);
    for (auto& v : sv) v = rng.uniform(0.3, 1.0);
    const Matrix x = nora::test::with_singular_values(8, 8, sv, rng);
    const Matrix q = nora::newton_schulz(x, 15);
    const Matrix uv = nora::test::polar_factor(x);
    EXPECT_LE(nora::norm_fro(nora::axpy(-1.0, uv, q)) / nora::norm_fro(uv), 0.05);
  }
}

TEST(NewtonSchulz, TallInputTransposed) {
  Rng rng(9);
  const Matrix x = nora::random_normal(9, 4, rng);
  const Matrix direct = nora::transpose(nora::orthogonalize(nora::transpose(x), 7));
  EXPECT_LE(max_abs_diff(nora::orthogonalize(x, 7), direct), 1e-14);
}

TEST(NewtonSchulz, ImprovesConditioning) {
  Rng rng(10);
  const Matrix x = nora::test::with_singular_values(6, 6, {1, 0.9, 0.8, 0.7, 0.6, 0.5}, rng);
  const auto before = nora::test::singular_values(x);
  const auto after = nora::test::singular_values(nora::newton_schulz(x, 3));
  EXPECT_LT((after.array() - 1).abs().maxCoeff(), (before.array() - 1).abs().maxCoeff());
}

TEST(NewtonSchulz, ZeroInputGivesZero) {
  const Matrix z = nora::orthogonalize(Matrix(3, 5), 5);
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
}

TEST(NewtonSchulz, BackendsAgree) {
  Rng rng(11);
  const Matrix x = nora::random_normal(48, 96, rng);
  EXPECT_LE(max_abs_diff(nora::orthogonalize(x, 5), nora::orthogonalize(x, 5, nora::GemmBackend::blas)), 1e-12);
}

TEST(GemmProvider, KnownName) {
  const auto p = nora::gemm_provider<double>();
  EXPECT_TRUE(p == "openblas" || p == "eigen");
}
