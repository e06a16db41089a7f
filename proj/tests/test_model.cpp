#include <gtest/gtest.h>

#include <cmath>

#include "nora/linalg.hpp"
#include "nora/model.hpp"
#include "oracles.hpp"

using nora::LayerKind;
using nora::LayerSpec;
using nora::Matrix;
using nora::Model;
using nora::Rng;

namespace {

std::vector<int> cyclic_labels(std::size_t n, int k) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % k);
  return y;
}

Model dense_softmax(std::size_t in, std::size_t out, bool bias, Rng& rng) {
  return Model({{LayerKind::dense, in, out, false, bias, 0.0, "fc"},
                {LayerKind::softmax_ce, out, out, false, false, 0.0, "loss"}},
               rng);
}

}  // namespace

TEST(Model, IdentityDense) {
  Rng rng(1);
  Model m = dense_softmax(3, 3, false, rng);
  m.mutable_param(m.find_param("fc.weight")) = Matrix::identity(3);
  EXPECT_EQ(m.predict(Matrix{{1, 0, 0}}), (Matrix{{1, 0, 0}}));
}

TEST(Model, UniformLogitsGiveLogK) {
  Rng rng(2);
  Model m = dense_softmax(4, 5, false, rng);
  m.mutable_param(0) = Matrix(5, 4);
  const Matrix x = nora::random_normal(6, 4, rng);
  EXPECT_NEAR(m.loss(x, cyclic_labels(6, 5)), std::log(5.0), 1e-14);
}

TEST(Model, SingleSampleGradientIsOuterProduct) {
  Rng rng(3);
  Model m = dense_softmax(4, 3, false, rng);
  const Matrix x = nora::random_normal(1, 4, rng);
  const std::vector<int> y{2};
  auto fwd = m.forward(x, y);
  const auto grads = m.backward(fwd.acts);
  const Matrix logits = m.predict(x);
  double z = 0;
  for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits(0, c));
  for (std::size_t c = 0; c < 3; ++c) {
    const double delta = std::exp(logits(0, c)) / z - (c == 2 ? 1.0 : 0.0);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(grads[0](c, j), delta * x(0, j), 1e-14);
  }
}

TEST(Model, SaturatedCorrectLogitsHaveTinyGradient) {
  Rng rng(4);
  Model m = dense_softmax(3, 3, false, rng);
  m.mutable_param(0) = nora::scaled(Matrix::identity(3), 50.0);
  const Matrix x = Matrix::identity(3);
  auto fwd = m.forward(x, std::vector<int>{0, 1, 2});
  const auto grads = m.backward(fwd.acts);
  EXPECT_LT(nora::norm_fro(grads[0]), 1e-6);
}

TEST(Model, GradCheckMlpWidth32) {
  Rng rng(5);
  const Model m = nora::make_mlp(16, 32, 4, 2, rng);
  const Matrix x = nora::random_normal(12, 16, rng);
  EXPECT_LE(nora::grad_check(m, x, cyclic_labels(12, 4), 1e-5).max_rel_error, 1e-6);
}

TEST(Model, GradCheckRmsNormOnly) {
  Rng rng(6);
  Model m({{LayerKind::rmsnorm, 5, 5, true, false, 0.0, "norm"},
           {LayerKind::softmax_ce, 5, 5, false, false, 0.0, "loss"}},
          rng);
  Matrix& gain = m.mutable_param(m.find_param("norm.gain"));
  for (auto& v : gain.data()) v = rng.uniform(0.5, 2.0);
  const Matrix x = nora::random_normal(7, 5, rng);
  EXPECT_LE(nora::grad_check(m, x, cyclic_labels(7, 5)).max_rel_error, 1e-7);
}

TEST(Model, GradCheckRmsNormWithEps) {
  Rng rng(7);
  const Model m = nora::make_mlp(6, 8, 3, 1, rng, 1.0, 1e-8);
  const Matrix x = nora::random_normal(9, 6, rng);
  EXPECT_LE(nora::grad_check(m, x, cyclic_labels(9, 3)).max_rel_error, 1e-6);
}

TEST(Model, GradCheckSingleDenseWithBias) {
  Rng rng(8);
  const Model m = dense_softmax(5, 3, true, rng);
  const Matrix x = nora::random_normal(10, 5, rng);
  EXPECT_LE(nora::grad_check(m, x, cyclic_labels(10, 3)).max_rel_error, 1e-9);
}

TEST(Model, RowScaleInvarianceAndTangentGradient) {
  Rng rng(9);
  Model m = nora::make_mlp(8, 12, 3, 2, rng);
  const Matrix x = nora::random_normal(16, 8, rng);
  const auto y = cyclic_labels(16, 3);
  for (const char* name : {"hidden0.weight", "hidden1.weight"}) {
    const std::size_t k = m.find_param(name);
    auto fwd = m.forward(x, y);
    const auto grads = m.backward(fwd.acts);
    const Matrix& w = m.param(k);
    const auto dots = nora::row_dot(grads[k], w);
    const auto gn = nora::row_norms(grads[k]);
    const auto wn = nora::row_norms(w);
    for (std::size_t i = 0; i < w.rows(); ++i) EXPECT_LE(std::abs(dots[i]), 1e-8 * gn[i] * wn[i]);

    const double base = m.loss(x, y);
    Matrix& wm = m.mutable_param(k);
    for (std::size_t i = 0; i < wm.rows(); ++i) {
      const double s = rng.uniform(0.1, 10.0);
      for (std::size_t j = 0; j < wm.cols(); ++j) wm(i, j) *= s;
    }
    EXPECT_LE(std::abs(m.loss(x, y) - base), 1e-10 * std::abs(base));
  }
}

TEST(Model, StaleOrConsumedActivationsRejected) {
  Rng rng(10);
  Model m = nora::make_mlp(4, 6, 2, 1, rng);
  const Matrix x = nora::random_normal(3, 4, rng);
  const std::vector<int> y{0, 1, 0};
  auto fwd = m.forward(x, y);
  (void)m.backward(fwd.acts);
  EXPECT_TRUE(fwd.acts.consumed());
  EXPECT_THROW((void)m.backward(fwd.acts), std::logic_error);

  auto fwd2 = m.forward(x, y);
  m.mutable_param(0)(0, 0) += 1.0;
  EXPECT_THROW((void)m.backward(fwd2.acts), std::logic_error);

  Model other = nora::make_mlp(4, 6, 2, 1, rng);
  auto fwd3 = m.forward(x, y);
  EXPECT_THROW((void)other.backward(fwd3.acts), std::logic_error);
}

TEST(Model, DimensionErrors) {
  Rng rng(11);
  Model m = nora::make_mlp(4, 6, 2, 1, rng);
  EXPECT_THROW((void)m.loss(Matrix(3, 5), std::vector<int>{0, 0, 0}), std::invalid_argument);
  EXPECT_THROW((void)m.loss(Matrix(3, 4), std::vector<int>{0, 0}), std::invalid_argument);
  EXPECT_THROW((void)m.loss(Matrix(3, 4), std::vector<int>{0, 0, 2}), std::invalid_argument);
  EXPECT_THROW(Model({{LayerKind::softmax_ce, 2, 2}, {LayerKind::relu, 2, 2}}, rng), std::invalid_argument);
  EXPECT_THROW((void)m.find_param("nope"), std::invalid_argument);
}

TEST(Model, DeterministicInitAndLoss) {
  Rng a(12), b(12);
  const Model ma = nora::make_mlp(5, 7, 3, 2, a);
  const Model mb = nora::make_mlp(5, 7, 3, 2, b);
  for (std::size_t k = 0; k < ma.num_params(); ++k) EXPECT_EQ(ma.param(k), mb.param(k));
  Rng xr(13);
  const Matrix x = nora::random_normal(6, 5, xr);
  EXPECT_EQ(ma.loss(x, cyclic_labels(6, 3)), mb.loss(x, cyclic_labels(6, 3)));
}

TEST(Model, InitVariance) {
  Rng rng(14);
  const Model m = nora::make_mlp(400, 300, 2, 1, rng, 2.0);
  const Matrix& w = m.param(m.find_param("hidden0.weight"));
  double s2 = 0;
  for (double v : w.values()) s2 += v * v;
  EXPECT_NEAR(s2 / w.size(), 4.0 / 400.0, 0.02 * 4.0 / 400.0);
}
