#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nora/matrix.hpp"
#include "nora/rng.hpp"

namespace nora {

enum class TaskKind { sphere_align, gauss_mix, mup_probe };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct TaskSpec {
  TaskKind kind = TaskKind::sphere_align;
  std::size_t m = 64;        // rows of the trained matrix (sphere_align) / hidden width (gauss_mix)
  std::size_t n = 256;       // columns (sphere_align) / feature count (gauss_mix)
  std::size_t classes = 8;
  std::uint64_t seed = 0;
  double noise = 1.0;
  double mean_scale = 3.0;   // gauss_mix: distance of each class mean from the centroid scale
  std::size_t train_samples = 8192;
  std::size_t val_samples = 2048;

  void validate() const;
};

// ---- sphere_align: f(w) = sum_i 1/2 | w_i/|w_i| - u_i |^2 ----

struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Closed-form loss and gradient. Every row of w must be nonzero and every
/// target row unit-norm; the gradient rows are orthogonal to the w rows.
LossGrad sphere_align_loss_grad(const Matrix& w, const Matrix& targets);
double sphere_align_loss(const Matrix& w, const Matrix& targets);

struct SphereAlignProblem {
  Matrix w0;       // rows ~ N(0, I/n)
  Matrix targets;  // unit rows
};
SphereAlignProblem make_sphere_align(std::size_t m, std::size_t n, std::uint64_t seed);

/// Matrix with unit-norm random rows.
Matrix random_unit_rows(std::size_t m, std::size_t n, Rng& rng);

// ---- gauss_mix ----

struct Dataset {
  Matrix inputs;
  std::vector<int> labels;
};

struct GaussMix {
  Dataset train;
  Dataset val;
  Matrix means;  // classes x n
};

/// Class means sit on a centred simplex, mean_c = s (e_c - 1/k), embedded in
/// the first k coordinates (k <= n) and rotated by a seeded orthogonal
/// matrix; samples add isotropic N(0, noise^2) noise. Labels cycle 0..k-1, so
/// class counts are exactly balanced when the sample count is a multiple of k.
GaussMix gauss_mix_generate(const TaskSpec& spec);

/// Binary layout: 8 magic bytes "NORADS01", u64 rows, u64 cols, u64 label
/// flag, rows*cols little-endian f64 in row-major order, then (if flagged)
/// rows little-endian i64 labels. A text sidecar "<path>.txt" holds `meta`.
void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& meta);
Dataset read_dataset(const std::filesystem::path& path);

// ---- mu-P probe ----

enum class ProbeDirection { nora, rmnp, zero };

struct ProbeOptions {
  ProbeDirection direction = ProbeDirection::nora;
  double sigma_w = 1.0;
  double sigma_x = 1.0;
  double delta = 1.0;  // error signal of the probed row
};

struct ProbeRecord {
  std::size_t width = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;
  double inner = 0.0;  // <d_i, x>
  double ratio = 0.0;  // inner / (sigma_x sqrt(n))
};

/// For each (width, seed): w_i ~ N(0, sigma_w^2 I / n), x ~ N(0, sigma_x^2 I),
/// g_i = delta x, d_i from the chosen optimizer; records <d_i, x>.
std::vector<ProbeRecord> mup_probe(const std::vector<std::size_t>& widths,
                                   const std::vector<std::uint64_t>& seeds,
                                   const ProbeOptions& options = {});

}  // namespace nora
