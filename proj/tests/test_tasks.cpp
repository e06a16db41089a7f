#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "nora/harness.hpp"
#include "nora/linalg.hpp"
#include "nora/optimizers.hpp"
#include "nora/tasks.hpp"
#include "oracles.hpp"

using nora::Matrix;
using nora::Rng;
using nora::TaskSpec;

TEST(SphereAlign, AlignedAndAntipodal) {
  const Matrix u{{0.6, 0.8}, {1, 0}};
  const auto aligned = nora::sphere_align_loss_grad(Matrix{{3, 4}, {2, 0}}, u);
  EXPECT_NEAR(aligned.loss, 0.0, 1e-15);
  EXPECT_LE(nora::norm_fro(aligned.grad), 1e-15);
  EXPECT_NEAR(nora::sphere_align_loss(Matrix{{-0.6, -0.8}, {-5, 0}}, u), 4.0, 1e-14);
}

TEST(SphereAlign, ZeroRowRejected) {
  EXPECT_THROW(nora::sphere_align_loss_grad(Matrix{{0, 0}}, Matrix{{1, 0}}), std::invalid_argument);
}

TEST(SphereAlign, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  const Matrix u = nora::random_unit_rows(4, 6, rng);
  const Matrix w = nora::random_normal(4, 6, rng);
  const auto lg = nora::sphere_align_loss_grad(w, u);
  const double h = 1e-5;
  for (std::size_t k = 0; k < w.size(); ++k) {
    Matrix up = w, dn = w;
    up.data()[k] += h;
    dn.data()[k] -= h;
    const double fd = (nora::sphere_align_loss(up, u) - nora::sphere_align_loss(dn, u)) / (2 * h);
    EXPECT_NEAR(lg.grad.values()[k], fd, 1e-8);
  }
}

TEST(SphereAlign, RowScaleInvariantAndTangent) {
  Rng rng(2);
  const Matrix u = nora::random_unit_rows(10, 7, rng);
  const Matrix w = nora::random_normal(10, 7, rng);
  Matrix dw = w;
  for (std::size_t i = 0; i < 10; ++i) {
    const double s = rng.uniform(0.1, 10.0);
    for (std::size_t j = 0; j < 7; ++j) dw(i, j) *= s;
  }
  const auto base = nora::sphere_align_loss_grad(w, u);
  EXPECT_NEAR(nora::sphere_align_loss(dw, u), base.loss, 1e-12 * base.loss);
  const auto dots = nora::row_dot(base.grad, w);
  const auto gn = nora::row_norms(base.grad), wn = nora::row_norms(w);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_LE(std::abs(dots[i]), 1e-8 * gn[i] * wn[i]);
}

TEST(SphereAlign, ProblemIsSeeded) {
  const auto a = nora::make_sphere_align(8, 16, 3);
  const auto b = nora::make_sphere_align(8, 16, 3);
  EXPECT_EQ(a.w0, b.w0);
  EXPECT_EQ(a.targets, b.targets);
  for (double n : nora::row_norms(a.targets)) EXPECT_NEAR(n, 1.0, 1e-14);
}

TEST(GaussMix, DeterministicAndBalanced) {
  TaskSpec s;
  s.kind = nora::TaskKind::gauss_mix;
  s.n = 16;
  s.classes = 2;
  s.train_samples = 512;
  s.val_samples = 128;
  s.seed = 5;
  const auto a = nora::gauss_mix_generate(s);
  const auto b = nora::gauss_mix_generate(s);
  EXPECT_EQ(a.train.inputs, b.train.inputs);
  EXPECT_EQ(a.val.labels, b.val.labels);
  const auto ones = std::count(a.train.labels.begin(), a.train.labels.end(), 1);
  EXPECT_EQ(ones, 256);
  // Symmetric means: the two class means are negatives of each other.
  for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(a.means(0, j), -a.means(1, j), 1e-12);
}

TEST(GaussMix, NoiselessTrainsToNearZeroLoss) {
  nora::RunConfig cfg;
  cfg.task.kind = nora::TaskKind::gauss_mix;
  cfg.task.n = 16;
  cfg.task.m = 32;
  cfg.task.classes = 4;
  cfg.task.noise = 0.0;
  cfg.task.train_samples = 256;
  cfg.task.val_samples = 64;
  cfg.matrix_hyper.lr = 0.02;
  cfg.steps = 300;
  cfg.eval_every = 50;
  cfg.batch_size = 64;
  const auto r = nora::train(cfg);
  ASSERT_FALSE(r.aborted) << r.diagnostic;
  EXPECT_LT(r.best_val_loss, 0.05);
}

TEST(GaussMix, DatasetRoundTrip) {
  TaskSpec s;
  s.kind = nora::TaskKind::gauss_mix;
  s.n = 5;
  s.classes = 3;
  s.train_samples = 30;
  s.val_samples = 9;
  const auto g = nora::gauss_mix_generate(s);
  const auto dir = std::filesystem::temp_directory_path() / "nora_test_dataset";
  std::filesystem::create_directories(dir);
  const auto path = dir / "train.bin";
  nora::write_dataset(path, g.train, "kind=gauss_mix");
  const auto back = nora::read_dataset(path);
  EXPECT_EQ(back.inputs, g.train.inputs);
  EXPECT_EQ(back.labels, g.train.labels);
  std::ifstream meta(path.string() + ".txt");
  std::string line;
  std::getline(meta, line);
  EXPECT_NE(line.find("gauss_mix"), std::string::npos);

  std::ofstream(dir / "bad.bin") << "garbage";
  EXPECT_ANY_THROW(nora::read_dataset(dir / "bad.bin"));
  std::filesystem::remove_all(dir);
}

TEST(Probe, SignAndRatio) {
  std::vector<std::uint64_t> seeds(32);
  for (std::uint64_t k = 0; k < 32; ++k) seeds[k] = k + 1;
  nora::ProbeOptions pos;
  const auto rp = nora::mup_probe({16384}, seeds, pos);
  double mean = 0;
  for (const auto& r : rp) mean += r.ratio;
  mean /= rp.size();
  EXPECT_GE(mean, 0.95);
  EXPECT_LE(mean, 1.05);

  nora::ProbeOptions neg;
  neg.delta = -1.0;
  const auto rn = nora::mup_probe({4096}, seeds, neg);
  for (const auto& r : rn) EXPECT_LT(r.inner, 0.0);
}

TEST(TaskSpec, Validation) {
  TaskSpec s;
  s.kind = nora::TaskKind::gauss_mix;
  s.classes = 1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = TaskSpec{};
  s.kind = nora::TaskKind::gauss_mix;
  s.n = 4;
  s.classes = 8;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_EQ(nora::parse_task_kind("gauss_mix"), nora::TaskKind::gauss_mix);
  EXPECT_THROW(nora::parse_task_kind("c4"), std::invalid_argument);
}
