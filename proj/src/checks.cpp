#include "nora/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nora/harness.hpp"
#include "nora/kernels.hpp"
#include "nora/linalg.hpp"
#include "nora/model.hpp"
#include "nora/optimizers.hpp"
#include "nora/rng.hpp"
#include "nora/tasks.hpp"

namespace nora {

namespace {

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

CheckResult bounded(std::string name, double value, double limit) {
  return {std::move(name), value <= limit, "max " + sci(value) + " <= " + sci(limit)};
}

// Random Nora steps (lambda = 0) on random shapes; measures row orthogonality
// of d to w and the squared-norm growth against lr^2.
std::pair<CheckResult, CheckResult> nora_step_geometry(Rng& rng) {
  double worst_orth = 0.0;
  double worst_growth = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(32);
    const std::size_t n = 1 + rng.below(32);
    Hyper h;
    h.lr = rng.uniform(1e-3, 0.2);
    h.momentum = rng.uniform(0.0, 0.99);
    ParamGroup g("w", random_normal(m, n, rng), h);
    for (int t = 0; t < 10; ++t) {
      const Matrix grad = random_normal(m, n, rng);
      StepTrace tr;
      const auto before = row_norms(g.weight);
      step(g, grad, &tr);
      const auto after = row_norms(g.weight);
      const auto dots = row_dot(tr.direction, tr.weight_before);
      const auto dn = row_norms(tr.direction);
      for (std::size_t i = 0; i < m; ++i) {
        worst_orth = std::max(worst_orth, std::abs(dots[i]) / std::max(1.0, before[i]));
        const double expect = dn[i] > 0 ? h.lr * h.lr : 0.0;
        const double grow = after[i] * after[i] - before[i] * before[i];
        worst_growth = std::max(worst_growth, std::abs(grow - expect));
      }
    }
  }
  return {bounded("nora_row_orthogonality", worst_orth, 1e-10),
          bounded("nora_pythagorean_growth", worst_growth, 1e-10)};
}

CheckResult projection_properties(Rng& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 1 + rng.below(8);
    const std::size_t n = 1 + rng.below(8);
    const Matrix w = random_normal(m, n, rng);
    const Matrix a = random_normal(m, n, rng);
    const Matrix b = random_normal(m, n, rng);
    const Matrix pa = row_perp_project(a, w);
    const Matrix pb = row_perp_project(b, w);
    const Matrix ppa = row_perp_project(pa, w);
    const Matrix diff = axpy(-1.0, b, a);
    const Matrix pdiff = axpy(-1.0, pb, pa);
    worst = std::max(worst, norm_fro(axpy(-1.0, pa, ppa)) / std::max(1.0, norm_fro(pa)));
    worst = std::max(worst, norm_fro(pdiff) - norm_fro(diff));
    worst = std::max(worst, norm_12(pdiff) - norm_12(diff));
    worst = std::max(worst, norm_inf2(pdiff) - norm_inf2(diff));
  }
  return bounded("projection_idempotent_nonexpansive", worst, 1e-12);
}

CheckResult row_normalize_geometry(Rng& rng) {
  Matrix x = random_normal(16, 9, rng);
  for (std::size_t j = 0; j < x.cols(); ++j) x(3, j) = 0.0;
  const Matrix d = row_normalize(x);
  const auto norms = row_norms(d);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.rows(); ++i) {
    worst = std::max(worst, std::abs(norms[i] - (i == 3 ? 0.0 : 1.0)));
  }
  worst = std::max(worst, std::abs(inner(x, d) - norm_12(x)) / norm_12(x));
  return bounded("row_normalize_geometry", worst, 1e-12);
}

CheckResult audit_check(std::uint64_t seed, double momentum, bool tangent, const char* name) {
  Hyper h;
  h.lr = 0.01;
  h.momentum = momentum;
  const auto traj = record_sphere_trajectory(16, 48, h, 200, seed);
  AuditTolerances tol;
  if (tangent) tol.grad_is_tangent = 1e-9;
  const AuditReport rep = lemma_audit(traj, tol);
  CheckResult r{name, rep.passed(), ""};
  r.detail = rep.passed() ? "min slack " + sci(rep.min_lower_bound_slack) : rep.violations.front();
  return r;
}

CheckResult grad_check_mlp(Rng& rng) {
  Model model = make_mlp(12, 16, 4, 2, rng);
  const Matrix x = random_normal(10, 12, rng);
  std::vector<int> y(10);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = static_cast<int>(k % 4);
  return bounded("mlp_gradient_fd", grad_check(model, x, y, 1e-5).max_rel_error, 1e-6);
}

CheckResult row_scale_invariance(Rng& rng) {
  Model model = make_mlp(8, 12, 3, 2, rng);
  const Matrix x = random_normal(9, 8, rng);
  std::vector<int> y(9);
  for (std::size_t k = 0; k < y.size(); ++k) y[k] = static_cast<int>(k % 3);
  const double base = model.loss(x, y);
  const std::size_t k = model.find_param("hidden0.weight");
  Matrix& w = model.mutable_param(k);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double s = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) *= s;
  }
  const double rel = std::abs(model.loss(x, y) - base) / std::abs(base);
  return bounded("rmsnorm_row_scale_invariance", rel, 1e-10);
}

CheckResult sphere_gradient_tangent(Rng& rng) {
  const Matrix u = random_unit_rows(10, 20, rng);
  const Matrix w = random_normal(10, 20, rng);
  const LossGrad lg = sphere_align_loss_grad(w, u);
  const auto dots = row_dot(lg.grad, w);
  const auto gn = row_norms(lg.grad);
  const auto wn = row_norms(w);
  double worst = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    worst = std::max(worst, std::abs(dots[i]) / std::max(1e-300, gn[i] * wn[i]));
  }
  return bounded("sphere_gradient_tangent", worst, 1e-8);
}

CheckResult newton_schulz_polar(Rng& rng) {
  Matrix x = random_normal(8, 8, rng, 0.3 / std::sqrt(8.0));
  for (std::size_t i = 0; i < 8; ++i) x(i, i) += 1.0;
  const Matrix q = orthogonalize(x, 25);
  const Matrix gram = matmul(transpose(q), q);
  double err = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) err = std::max(err, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
  }
  return bounded("newton_schulz_orthogonal", err, 1e-8);
}

CheckResult serial_parallel_agree(Rng& rng) {
  const Matrix x = random_normal(257, 131, rng);
  const Matrix w = random_normal(257, 131, rng);
  Matrix a(257, 131), b(257, 131);
  kernels::serial::row_perp_project(x, w, a);
  kernels::parallel::row_perp_project(x, w, b);
  bool same = a == b;
  kernels::serial::row_normalize(x, 0.0, a);
  kernels::parallel::row_normalize(x, 0.0, b);
  same = same && a == b;
  same = same && kernels::serial::norm_12(x) == kernels::parallel::norm_12(x);
  return {"serial_parallel_bitwise", same, same ? "identical" : "kernels differ"};
}

CheckResult routing() {
  const Matrix m(4, 4);
  const std::vector<NamedParam> params{{"tok_embed", m, 2}, {"hidden0.weight", m, 2},
                                       {"hidden0_norm.gain", Matrix(1, 4), 1},
                                       {"lm_head.weight", m, 2}};
  const auto groups = route_params(params, Hyper{}, Hyper{.kind = OptimizerKind::adam});
  const bool ok = groups[0].hyper.kind == OptimizerKind::adam && groups[1].hyper.kind == OptimizerKind::nora &&
                  groups[2].hyper.kind == OptimizerKind::adam && groups[3].hyper.kind == OptimizerKind::adam;
  return {"parameter_routing", ok, ok ? "embed/lm_head/1-D to adam" : "misrouted parameter"};
}

CheckResult train_determinism(std::uint64_t seed) {
  RunConfig cfg;
  cfg.task.m = 8;
  cfg.task.n = 24;
  cfg.steps = 60;
  cfg.eval_every = 10;
  cfg.seed = seed;
  const auto a = train(cfg);
  const auto b = train(cfg);
  bool same = a.records.size() == b.records.size();
  for (std::size_t k = 0; same && k < a.records.size(); ++k) {
    same = a.records[k].loss == b.records[k].loss && a.records[k].proj_grad_12 == b.records[k].proj_grad_12;
  }
  return {"train_determinism", same, same ? "bitwise identical records" : "records differ"};
}

}  // namespace

std::vector<CheckResult> run_property_suite(std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "check");
  std::vector<CheckResult> out;
  auto [orth, growth] = nora_step_geometry(rng);
  out.push_back(orth);
  out.push_back(growth);
  out.push_back(projection_properties(rng));
  out.push_back(row_normalize_geometry(rng));
  out.push_back(audit_check(seed, 0.95, false, "lemma_audit_momentum"));
  out.push_back(audit_check(seed, 0.0, true, "lemma_audit_full_batch"));
  out.push_back(grad_check_mlp(rng));
  out.push_back(row_scale_invariance(rng));
  out.push_back(sphere_gradient_tangent(rng));
  out.push_back(newton_schulz_polar(rng));
  out.push_back(serial_parallel_agree(rng));
  out.push_back(routing());
  out.push_back(train_determinism(seed));
  return out;
}

}  // namespace nora
