#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nora/matrix.hpp"
#include "nora/optimizers.hpp"
#include "nora/rng.hpp"

namespace nora {

enum class LayerKind { dense, rmsnorm, relu, softmax_ce };

/// One layer of a feed-forward stack. Inputs are batches laid out one sample
/// per row; a dense layer computes Y = X W^T (+ b) with W of shape out x in.
///
/// `rmsnorm` normalizes every output unit by its root-mean-square over the
/// batch, y_bi = gain_i * h_bi / sqrt(mean_b h_bi^2 + eps). Each unit is fed
/// by exactly one row of the preceding dense weight, so scaling that row by
/// any positive factor leaves the output unchanged (exactly so for eps = 0).
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  bool has_gain = true;   // rmsnorm
  bool has_bias = false;  // dense
  double eps = 0.0;       // rmsnorm
  std::string name;
};

class Model;

/// Forward caches for one batch. Consumed by exactly one backward pass.
class Activations {
 public:
  [[nodiscard]] std::size_t batch() const noexcept { return batch_; }
  [[nodiscard]] bool consumed() const noexcept { return consumed_; }

 private:
  friend class Model;
  const Model* owner_ = nullptr;
  std::uint64_t revision_ = 0;
  std::size_t batch_ = 0;
  bool consumed_ = false;
  std::vector<Matrix> inputs;     // input of every layer
  std::vector<Matrix> normed;     // rmsnorm: h / r
  std::vector<std::vector<double>> rms;  // rmsnorm: r per unit
  Matrix probs;                   // softmax output
  std::vector<int> labels;
};

struct ForwardResult {
  double loss = 0.0;
  Activations acts;
};

class Model {
 public:
  /// Dense weights get i.i.d. N(0, sigma_w^2 / in_dim) entries; gains start at
  /// 1 and biases at 0.
  Model(std::vector<LayerSpec> layers, Rng& init_rng, double sigma_w = 1.0);

  [[nodiscard]] const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  [[nodiscard]] const std::vector<NamedParam>& params() const noexcept { return params_; }
  [[nodiscard]] std::size_t num_params() const noexcept { return params_.size(); }
  [[nodiscard]] const Matrix& param(std::size_t k) const { return params_.at(k).value; }
  /// Mutable access invalidates outstanding activations.
  Matrix& mutable_param(std::size_t k);
  [[nodiscard]] std::size_t find_param(const std::string& name) const;

  /// Mean softmax cross-entropy. The last layer must be softmax_ce.
  [[nodiscard]] ForwardResult forward(const Matrix& inputs, std::span<const int> labels) const;
  [[nodiscard]] double loss(const Matrix& inputs, std::span<const int> labels) const;
  /// Output of the stack, excluding the final softmax_ce if present.
  [[nodiscard]] Matrix predict(const Matrix& inputs) const;
  /// Gradients of the mean loss, one per parameter (same order as params()).
  [[nodiscard]] std::vector<Matrix> backward(Activations& acts) const;

  /// Fraction of rows whose argmax prediction equals the label.
  [[nodiscard]] double accuracy(const Matrix& inputs, std::span<const int> labels) const;

 private:
  struct Slot {
    int weight = -1;
    int bias = -1;
    int gain = -1;
  };
  Matrix run(const Matrix& inputs, Activations* acts) const;

  std::vector<LayerSpec> layers_;
  std::vector<Slot> slots_;
  std::vector<NamedParam> params_;
  std::uint64_t revision_ = 0;
};

/// dense(in->hidden) -> rmsnorm -> relu, repeated `depth` times, then a dense
/// head named "lm_head" into `classes` logits and softmax_ce.
Model make_mlp(std::size_t in_dim, std::size_t hidden, std::size_t classes, int depth, Rng& rng,
               double sigma_w = 1.0, double norm_eps = 0.0);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_param;
};

/// Compares backward() against central differences with step h:
/// max |analytic - fd| / max(1, |fd|) per parameter.
GradCheckResult grad_check(const Model& model, const Matrix& inputs, std::span<const int> labels,
                           double h = 1e-5);

}  // namespace nora
