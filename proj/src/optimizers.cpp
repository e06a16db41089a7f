#include "nora/optimizers.hpp"

#include <cmath>
#include <stdexcept>

#include "nora/linalg.hpp"

namespace nora {

namespace {

void require_grad_shape(const ParamGroup& group, const Matrix& grad) {
  if (!group.weight.same_shape(grad)) {
    throw std::invalid_argument("parameter '" + group.id + "': gradient shape " +
                                shape_str(grad.rows(), grad.cols()) + " does not match weight " +
                                shape_str(group.weight.rows(), group.weight.cols()));
  }
}

// v <- beta v + (1 - beta) g
void update_momentum(Matrix& v, const Matrix& g, double beta) {
  auto vs = v.data();
  auto gs = g.data();
  for (std::size_t k = 0; k < vs.size(); ++k) vs[k] = beta * vs[k] + (1.0 - beta) * gs[k];
}

// w <- w - lr (d + wd w)
void apply_update(Matrix& w, const Matrix& d, double lr, double wd) {
  auto ws = w.data();
  auto ds = d.data();
  for (std::size_t k = 0; k < ws.size(); ++k) ws[k] -= lr * (ds[k] + wd * ws[k]);
}

void fill_trace(StepTrace* trace, const Matrix& w_before, const Matrix& v, const Matrix& proj,
                const Matrix& d, double lr) {
  if (trace == nullptr) return;
  trace->weight_before = w_before;
  trace->momentum = v;
  trace->projected = proj;
  trace->direction = d;
  trace->lr = lr;
}

bool in_unit_interval(double x) { return std::isfinite(x) && x >= 0.0 && x < 1.0; }

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::nora: return "nora";
    case OptimizerKind::muon: return "muon";
    case OptimizerKind::rmnp: return "rmnp";
    case OptimizerKind::mano: return "mano";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

std::string_view to_string(NoraMode mode) {
  return mode == NoraMode::canonical ? "canonical" : "reference";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "nora") return OptimizerKind::nora;
  if (name == "muon") return OptimizerKind::muon;
  if (name == "rmnp") return OptimizerKind::rmnp;
  if (name == "mano") return OptimizerKind::mano;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

NoraMode parse_nora_mode(std::string_view name) {
  if (name == "canonical") return NoraMode::canonical;
  if (name == "reference") return NoraMode::reference;
  throw std::invalid_argument("unknown nora mode '" + std::string(name) + "'");
}

void Hyper::validate() const {
  if (!(std::isfinite(lr) && lr > 0)) throw std::invalid_argument("lr must be finite and > 0");
  if (!in_unit_interval(momentum)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(std::isfinite(weight_decay) && weight_decay >= 0))
    throw std::invalid_argument("weight_decay must be finite and >= 0");
  if (ns_iters < 1) throw std::invalid_argument("ns_iters must be >= 1");
  if (!in_unit_interval(adam_betas.first) || !in_unit_interval(adam_betas.second))
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (!(std::isfinite(adam_eps) && adam_eps > 0)) throw std::invalid_argument("adam_eps must be > 0");
  if (!(std::isfinite(blend) && blend >= 0 && blend <= 1))
    throw std::invalid_argument("blend must lie in [0, 1]");
  if (!(std::isfinite(ref_eps) && ref_eps >= 0)) throw std::invalid_argument("ref_eps must be >= 0");
  if (!(std::isfinite(rn_eps) && rn_eps >= 0)) throw std::invalid_argument("rn_eps must be >= 0");
}

OptState OptState::zeros_like(const Matrix& w) {
  OptState s;
  s.momentum_buf = Matrix(w.rows(), w.cols());
  return s;
}

ParamGroup::ParamGroup(std::string id_, Matrix weight_, Hyper hyper_, bool is_matrix)
    : id(std::move(id_)),
      weight(std::move(weight_)),
      hyper(hyper_),
      state(OptState::zeros_like(weight)),
      is_matrix_param(is_matrix) {
  hyper.validate();
  if (!is_matrix_param && hyper.kind != OptimizerKind::adam) {
    throw std::invalid_argument("parameter '" + id + "' is not a matrix parameter; only adam applies");
  }
}

Matrix nora_direction(const Matrix& w, const Matrix& v, double rn_eps) {
  return row_normalize(row_perp_project(v, w), rn_eps);
}

void nora_step(ParamGroup& group, const Matrix& grad, StepTrace* trace) {
  require_grad_shape(group, grad);
  const Hyper& h = group.hyper;
  OptState& s = group.state;
  ++s.step;
  update_momentum(s.momentum_buf, grad, h.momentum);
  std::size_t zero_rows = 0;
  const Matrix projected = row_perp_project(s.momentum_buf, group.weight, &zero_rows);
  s.zero_weight_rows += static_cast<long>(zero_rows);
  const Matrix d = row_normalize(projected, h.rn_eps);
  fill_trace(trace, group.weight, s.momentum_buf, projected, d, h.lr);
  apply_update(group.weight, d, h.lr, h.weight_decay);
}

void nora_ref_step(ParamGroup& group, const Matrix& grad, StepTrace* trace) {
  require_grad_shape(group, grad);
  const Hyper& h = group.hyper;
  OptState& s = group.state;
  ++s.step;

  // buf.lerp_(g, 1 - beta); m_t = g.lerp(buf, momentum)
  Matrix& buf = s.momentum_buf;
  Matrix blended(grad.rows(), grad.cols());
  {
    auto b = buf.data();
    auto g = grad.data();
    auto m = blended.data();
    for (std::size_t k = 0; k < b.size(); ++k) {
      b[k] += (1.0 - h.momentum) * (g[k] - b[k]);
      m[k] = g[k] + h.blend * (b[k] - g[k]);
    }
  }

  const Matrix theta_hat = row_normalize_clamped(group.weight, h.ref_eps);
  const auto dots = row_dot(blended, theta_hat);
  Matrix projected = blended;
  for (std::size_t i = 0; i < projected.rows(); ++i) {
    for (std::size_t j = 0; j < projected.cols(); ++j) projected(i, j) -= dots[i] * theta_hat(i, j);
  }
  Matrix d = row_normalize_clamped(projected, h.ref_eps);
  const double scale =
      std::max(1.0, std::sqrt(static_cast<double>(grad.rows()) / static_cast<double>(grad.cols())));
  for (auto& v : d.data()) v *= scale;

  fill_trace(trace, group.weight, blended, projected, d, h.lr);
  if (h.weight_decay > 0) {
    for (auto& v : group.weight.data()) v *= 1.0 - h.lr * h.weight_decay;
  }
  apply_update(group.weight, d, h.lr, 0.0);
}

void muon_step(ParamGroup& group, const Matrix& grad, StepTrace* trace) {
  require_grad_shape(group, grad);
  const Hyper& h = group.hyper;
  OptState& s = group.state;
  ++s.step;
  update_momentum(s.momentum_buf, grad, h.momentum);
  Matrix d(grad.rows(), grad.cols());
  if (norm_fro(s.momentum_buf) > 0) {
    d = orthogonalize(s.momentum_buf, h.ns_iters);
  } else {
    ++s.skipped_updates;
  }
  fill_trace(trace, group.weight, s.momentum_buf, s.momentum_buf, d, h.lr);
  apply_update(group.weight, d, h.lr, h.weight_decay);
}

void rmnp_step(ParamGroup& group, const Matrix& grad, StepTrace* trace) {
  require_grad_shape(group, grad);
  const Hyper& h = group.hyper;
  OptState& s = group.state;
  ++s.step;
  update_momentum(s.momentum_buf, grad, h.momentum);
  const Matrix d = row_normalize(s.momentum_buf, h.rn_eps);
  fill_trace(trace, group.weight, s.momentum_buf, s.momentum_buf, d, h.lr);
  apply_update(group.weight, d, h.lr, h.weight_decay);
}

void mano_step(ParamGroup& group, const Matrix& grad, StepTrace* trace) {
  require_grad_shape(group, grad);
  const Hyper& h = group.hyper;
  OptState& s = group.state;
  ++s.step;
  update_momentum(s.momentum_buf, grad, h.momentum);
  std::size_t zero_rows = 0;
  Matrix projected, d;
  if (s.parity) {
    projected = row_perp_project(s.momentum_buf, group.weight, &zero_rows);
    d = row_normalize(projected, h.rn_eps);
  } else {
    const Matrix pt = row_perp_project(transpose(s.momentum_buf), transpose(group.weight), &zero_rows);
    d = transpose(row_normalize(pt, h.rn_eps));
    projected = transpose(pt);
  }
  s.parity = !s.parity;
  s.zero_weight_rows += static_cast<long>(zero_rows);
  fill_trace(trace, group.weight, s.momentum_buf, projected, d, h.lr);
  apply_update(group.weight, d, h.lr, h.weight_decay);
}

void adam_step(ParamGroup& group, const Matrix& grad) {
  require_grad_shape(group, grad);
  const Hyper& h = group.hyper;
  OptState& s = group.state;
  if (!s.adam_m) {
    s.adam_m = Matrix(grad.rows(), grad.cols());
    s.adam_v = Matrix(grad.rows(), grad.cols());
  }
  ++s.step;
  const auto [b1, b2] = h.adam_betas;
  auto m = s.adam_m->data();
  auto v = s.adam_v->data();
  auto g = grad.data();
  for (std::size_t k = 0; k < m.size(); ++k) {
    m[k] = m[k] * b1 + (1.0 - b1) * g[k];
    v[k] = v[k] * b2 + (1.0 - b2) * g[k] * g[k];
  }
  const double t = static_cast<double>(s.step);
  const double bc1 = 1.0 - std::pow(b1, t);
  const double bc2 = 1.0 - std::pow(b2, t);
  const double step_size = h.lr * std::sqrt(bc2) / bc1;
  auto w = group.weight.data();
  if (h.weight_decay > 0) {
    for (auto& x : w) x *= 1.0 - step_size * h.weight_decay;
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] -= step_size * (m[k] / (std::sqrt(v[k]) + h.adam_eps));
  }
}

void step(ParamGroup& group, const Matrix& grad, StepTrace* trace) {
  switch (group.hyper.kind) {
    case OptimizerKind::nora:
      if (group.hyper.nora_mode == NoraMode::reference) {
        nora_ref_step(group, grad, trace);
      } else {
        nora_step(group, grad, trace);
      }
      return;
    case OptimizerKind::muon: muon_step(group, grad, trace); return;
    case OptimizerKind::rmnp: rmnp_step(group, grad, trace); return;
    case OptimizerKind::mano: mano_step(group, grad, trace); return;
    case OptimizerKind::adam: adam_step(group, grad); return;
  }
}

bool is_matrix_route(const NamedParam& param) {
  return param.ndim >= 2 && param.name.find("embed") == std::string::npos &&
         param.name.find("lm_head") == std::string::npos;
}

std::vector<ParamGroup> route_params(const std::vector<NamedParam>& params,
                                     const Hyper& matrix_hyper, const Hyper& adam_hyper) {
  Hyper adam = adam_hyper;
  adam.kind = OptimizerKind::adam;
  std::vector<ParamGroup> groups;
  groups.reserve(params.size());
  for (const auto& p : params) {
    if (is_matrix_route(p)) {
      groups.emplace_back(p.name, p.value, matrix_hyper, true);
    } else {
      groups.emplace_back(p.name, p.value, adam, false);
    }
  }
  return groups;
}

}  // namespace nora
