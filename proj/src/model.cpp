#include "nora/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nora/linalg.hpp"

namespace nora {

namespace {

void check_dims(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw std::invalid_argument("model needs at least one layer");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.in_dim == 0 || l.out_dim == 0) throw std::invalid_argument("layer dims must be >= 1");
    if (l.kind != LayerKind::dense && l.in_dim != l.out_dim) {
      throw std::invalid_argument("layer " + std::to_string(k) + " must preserve its width");
    }
    if (l.kind == LayerKind::softmax_ce && k + 1 != layers.size()) {
      throw std::invalid_argument("softmax_ce must be the last layer");
    }
    if (l.kind == LayerKind::rmsnorm && !(l.eps >= 0)) {
      throw std::invalid_argument("rmsnorm eps must be >= 0");
    }
    if (k > 0 && layers[k - 1].out_dim != l.in_dim) {
      throw std::invalid_argument("layer " + std::to_string(k) + " expects width " +
                                  std::to_string(l.in_dim) + " but receives " +
                                  std::to_string(layers[k - 1].out_dim));
    }
  }
}

// Dense layers are plain gemms; BLAS keeps the training loops fast.
constexpr GemmBackend kGemm = GemmBackend::blas;

std::string layer_name(const LayerSpec& l, std::size_t k) {
  return l.name.empty() ? "layer" + std::to_string(k) : l.name;
}

}  // namespace

Model::Model(std::vector<LayerSpec> layers, Rng& init_rng, double sigma_w)
    : layers_(std::move(layers)) {
  check_dims(layers_);
  slots_.resize(layers_.size());
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    const std::string base = layer_name(l, k);
    if (l.kind == LayerKind::dense) {
      const double sd = sigma_w / std::sqrt(static_cast<double>(l.in_dim));
      slots_[k].weight = static_cast<int>(params_.size());
      params_.push_back({base + ".weight", random_normal(l.out_dim, l.in_dim, init_rng, sd), 2});
      if (l.has_bias) {
        slots_[k].bias = static_cast<int>(params_.size());
        params_.push_back({base + ".bias", Matrix(1, l.out_dim), 1});
      }
    } else if (l.kind == LayerKind::rmsnorm && l.has_gain) {
      slots_[k].gain = static_cast<int>(params_.size());
      params_.push_back({base + ".gain", Matrix(1, l.out_dim, 1.0), 1});
    }
  }
}

Matrix& Model::mutable_param(std::size_t k) {
  ++revision_;
  return params_.at(k).value;
}

std::size_t Model::find_param(const std::string& name) const {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (params_[k].name == name) return k;
  }
  throw std::invalid_argument("no parameter named '" + name + "'");
}

Matrix Model::run(const Matrix& inputs, Activations* acts) const {
  if (inputs.cols() != layers_.front().in_dim) {
    throw std::invalid_argument("input width " + std::to_string(inputs.cols()) +
                                " does not match model input " +
                                std::to_string(layers_.front().in_dim));
  }
  const std::size_t batch = inputs.rows();
  if (acts != nullptr) {
    acts->inputs.assign(layers_.size(), Matrix());
    acts->normed.assign(layers_.size(), Matrix());
    acts->rms.assign(layers_.size(), {});
  }
  Matrix x = inputs;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.kind == LayerKind::softmax_ce) break;
    if (acts != nullptr) acts->inputs[k] = x;
    switch (l.kind) {
      case LayerKind::dense: {
        Matrix y = matmul(x, transpose(params_[slots_[k].weight].value), kGemm);
        if (slots_[k].bias >= 0) {
          const Matrix& b = params_[slots_[k].bias].value;
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t j = 0; j < l.out_dim; ++j) y(r, j) += b(0, j);
        }
        x = std::move(y);
        break;
      }
      case LayerKind::rmsnorm: {
        std::vector<double> rms(l.out_dim, 0.0);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t j = 0; j < l.out_dim; ++j) rms[j] += x(r, j) * x(r, j);
        for (auto& v : rms) v = std::sqrt(v / static_cast<double>(batch) + l.eps);
        Matrix normed(batch, l.out_dim);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t j = 0; j < l.out_dim; ++j)
            normed(r, j) = rms[j] > 0 ? x(r, j) / rms[j] : 0.0;
        Matrix y = normed;
        if (slots_[k].gain >= 0) {
          const Matrix& g = params_[slots_[k].gain].value;
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t j = 0; j < l.out_dim; ++j) y(r, j) *= g(0, j);
        }
        if (acts != nullptr) {
          acts->normed[k] = std::move(normed);
          acts->rms[k] = std::move(rms);
        }
        x = std::move(y);
        break;
      }
      case LayerKind::relu:
        for (auto& v : x.data()) v = v > 0 ? v : 0.0;
        break;
      case LayerKind::softmax_ce:
        break;
    }
  }
  return x;
}

Matrix Model::predict(const Matrix& inputs) const { return run(inputs, nullptr); }

ForwardResult Model::forward(const Matrix& inputs, std::span<const int> labels) const {
  if (layers_.back().kind != LayerKind::softmax_ce) {
    throw std::invalid_argument("forward needs a softmax_ce output layer");
  }
  if (labels.size() != inputs.rows()) {
    throw std::invalid_argument("label count does not match batch size");
  }
  const std::size_t classes = layers_.back().out_dim;
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
  ForwardResult out;
  Activations& acts = out.acts;
  acts.owner_ = this;
  acts.revision_ = revision_;
  acts.batch_ = inputs.rows();
  acts.labels.assign(labels.begin(), labels.end());
  const Matrix logits = run(inputs, &acts);
  acts.inputs.back() = logits;

  Matrix probs(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < classes; ++j) probs(r, j) = std::exp(row[j] - mx) / z;
    total += std::log(z) + mx - row[static_cast<std::size_t>(labels[r])];
  }
  acts.probs = std::move(probs);
  out.loss = total / static_cast<double>(logits.rows());
  return out;
}

double Model::loss(const Matrix& inputs, std::span<const int> labels) const {
  return forward(inputs, labels).loss;
}

std::vector<Matrix> Model::backward(Activations& acts) const {
  if (acts.owner_ != this || acts.revision_ != revision_) {
    throw std::logic_error("activations were produced by a different model state");
  }
  if (acts.consumed_) throw std::logic_error("activations already consumed by a backward pass");
  acts.consumed_ = true;

  const std::size_t batch = acts.batch_;
  std::vector<Matrix> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.emplace_back(p.value.rows(), p.value.cols());

  // d(mean CE)/d logits = (p - onehot) / B
  Matrix delta = acts.probs;
  for (std::size_t r = 0; r < batch; ++r) delta(r, static_cast<std::size_t>(acts.labels[r])) -= 1.0;
  for (auto& v : delta.data()) v /= static_cast<double>(batch);

  for (std::size_t kk = layers_.size() - 1; kk-- > 0;) {
    const auto& l = layers_[kk];
    const Matrix& x = acts.inputs[kk];
    switch (l.kind) {
      case LayerKind::dense: {
        const Matrix& w = params_[slots_[kk].weight].value;
        grads[slots_[kk].weight] = matmul(transpose(delta), x, kGemm);
        if (slots_[kk].bias >= 0) {
          Matrix& gb = grads[slots_[kk].bias];
          for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t j = 0; j < l.out_dim; ++j) gb(0, j) += delta(r, j);
        }
        delta = matmul(delta, w, kGemm);
        break;
      }
      case LayerKind::rmsnorm: {
        const Matrix& normed = acts.normed[kk];
        const auto& rms = acts.rms[kk];
        Matrix dn = delta;
        if (slots_[kk].gain >= 0) {
          const Matrix& g = params_[slots_[kk].gain].value;
          Matrix& gg = grads[slots_[kk].gain];
          for (std::size_t r = 0; r < batch; ++r) {
            for (std::size_t j = 0; j < l.out_dim; ++j) {
              gg(0, j) += delta(r, j) * normed(r, j);
              dn(r, j) *= g(0, j);
            }
          }
        }
        // dh_bj = dn_bj / r_j - h_bj * sum_c(dn_cj h_cj) / (B r_j^3)
        std::vector<double> proj(l.out_dim, 0.0);
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t j = 0; j < l.out_dim; ++j) proj[j] += dn(r, j) * x(r, j);
        Matrix dh(batch, l.out_dim);
        for (std::size_t j = 0; j < l.out_dim; ++j) {
          const double rj = rms[j];
          if (!(rj > 0)) continue;
          const double c = proj[j] / (static_cast<double>(batch) * rj * rj * rj);
          for (std::size_t r = 0; r < batch; ++r) dh(r, j) = dn(r, j) / rj - x(r, j) * c;
        }
        delta = std::move(dh);
        break;
      }
      case LayerKind::relu:
        for (std::size_t q = 0; q < delta.size(); ++q) {
          if (!(x.data()[q] > 0)) delta.data()[q] = 0.0;
        }
        break;
      case LayerKind::softmax_ce:
        break;
    }
  }
  return grads;
}

double Model::accuracy(const Matrix& inputs, std::span<const int> labels) const {
  const Matrix out = predict(inputs);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto row = out.row(r);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(out.rows());
}

Model make_mlp(std::size_t in_dim, std::size_t hidden, std::size_t classes, int depth, Rng& rng,
               double sigma_w, double norm_eps) {
  if (depth < 1) throw std::invalid_argument("mlp depth must be >= 1");
  std::vector<LayerSpec> layers;
  std::size_t width = in_dim;
  for (int d = 0; d < depth; ++d) {
    const std::string tag = "hidden" + std::to_string(d);
    layers.push_back({LayerKind::dense, width, hidden, false, false, 0.0, tag});
    layers.push_back({LayerKind::rmsnorm, hidden, hidden, true, false, norm_eps, tag + "_norm"});
    layers.push_back({LayerKind::relu, hidden, hidden, false, false, 0.0, tag + "_act"});
    width = hidden;
  }
  layers.push_back({LayerKind::dense, width, classes, false, true, 0.0, "lm_head"});
  layers.push_back({LayerKind::softmax_ce, classes, classes, false, false, 0.0, "loss"});
  return Model(std::move(layers), rng, sigma_w);
}

GradCheckResult grad_check(const Model& model, const Matrix& inputs, std::span<const int> labels,
                           double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("grad_check: h must lie in [1e-7, 1e-3]");
  Model probe = model;
  auto fwd = probe.forward(inputs, labels);
  const auto analytic = probe.backward(fwd.acts);

  GradCheckResult result;
  result.per_param.assign(probe.num_params(), 0.0);
  for (std::size_t k = 0; k < probe.num_params(); ++k) {
    for (std::size_t q = 0; q < probe.param(k).size(); ++q) {
      const double orig = probe.param(k).data()[q];
      probe.mutable_param(k).data()[q] = orig + h;
      const double up = probe.loss(inputs, labels);
      probe.mutable_param(k).data()[q] = orig - h;
      const double down = probe.loss(inputs, labels);
      probe.mutable_param(k).data()[q] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[k].data()[q] - fd) / std::max(1.0, std::abs(fd));
      result.per_param[k] = std::max(result.per_param[k], err);
    }
    result.max_rel_error = std::max(result.max_rel_error, result.per_param[k]);
  }
  return result;
}

}  // namespace nora
