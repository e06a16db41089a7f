#include "nora/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nora/linalg.hpp"
#include "nora/model.hpp"

namespace nora {

std::string_view to_string(Schedule s) {
  return s == Schedule::constant ? "constant" : "cosine_warmup";
}

Schedule parse_schedule(std::string_view name) {
  if (name == "constant") return Schedule::constant;
  if (name == "cosine_warmup" || name == "cosine") return Schedule::cosine_warmup;
  throw std::invalid_argument("unknown schedule '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  task.validate();
  matrix_hyper.validate();
  adam_hyper.validate();
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (warmup_steps < 0 || (warmup_steps > 0 && warmup_steps >= steps)) {
    throw std::invalid_argument("warmup_steps must be < steps");
  }
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (task.kind == TaskKind::gauss_mix && (batch_size == 0 || depth < 1)) {
    throw std::invalid_argument("gauss_mix needs batch_size >= 1 and depth >= 1");
  }
  if (task.kind == TaskKind::mup_probe) {
    throw std::invalid_argument("mup_probe is not a training task; use the scale command");
  }
}

double schedule_factor(const RunConfig& cfg, long t) {
  if (cfg.schedule == Schedule::constant) return 1.0;
  if (cfg.warmup_steps > 0 && t <= cfg.warmup_steps) {
    return static_cast<double>(t) / static_cast<double>(cfg.warmup_steps);
  }
  const double span = static_cast<double>(std::max(1L, cfg.steps - cfg.warmup_steps));
  const double progress = static_cast<double>(t - cfg.warmup_steps) / span;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, progress)));
}

namespace {

using Clock = std::chrono::steady_clock;

void fill_row_stats(TrainRecord& rec, const Matrix& w) {
  const auto norms = row_norms(w);
  rec.row_norm_min = *std::min_element(norms.begin(), norms.end());
  rec.row_norm_max = *std::max_element(norms.begin(), norms.end());
  double sum = 0.0, sq = 0.0;
  for (double v : norms) {
    sum += v;
    sq += v * v;
  }
  rec.row_norm_mean = sum / static_cast<double>(norms.size());
  rec.weight_fro_sq = sq;
}

bool finite_record(const TrainRecord& r) {
  return std::isfinite(r.loss) && std::isfinite(r.proj_grad_12) && std::isfinite(r.row_norm_max);
}

TrainResult train_sphere(const RunConfig& cfg) {
  TrainResult result;
  const auto problem = make_sphere_align(cfg.task.m, cfg.task.n, cfg.seed);
  ParamGroup group("w", problem.w0, cfg.matrix_hyper, cfg.matrix_hyper.kind != OptimizerKind::adam);
  const auto start = Clock::now();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto make_record = [&](long t, const LossGrad& lg, double lr) {
    TrainRecord rec;
    rec.step = t;
    rec.loss = lg.loss;
    rec.val_loss = nan;
    rec.proj_grad_12 = norm_12(row_perp_project(lg.grad, group.weight));
    rec.lr = lr;
    fill_row_stats(rec, group.weight);
    rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
    return rec;
  };

  LossGrad lg = sphere_align_loss_grad(group.weight, problem.targets);
  result.records.push_back(make_record(0, lg, 0.0));
  for (long t = 1; t <= cfg.steps; ++t) {
    const double lr = cfg.matrix_hyper.lr * schedule_factor(cfg, t);
    group.hyper.lr = lr;
    step(group, lg.grad);
    lg = sphere_align_loss_grad(group.weight, problem.targets);
    const bool last = t == cfg.steps;
    if (!std::isfinite(lg.loss)) {
      result.records.push_back(make_record(t, lg, lr));
      result.aborted = true;
      result.diagnostic = "non-finite loss at step " + std::to_string(t);
      return result;
    }
    if (t % cfg.eval_every == 0 || last) result.records.push_back(make_record(t, lg, lr));
  }
  return result;
}

struct MiniBatcher {
  MiniBatcher(std::size_t total, std::size_t batch, Rng rng)
      : order(total), batch(std::min(batch, total)), rng(rng) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle();
  }

  void shuffle() {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    cursor = 0;
  }

  Dataset next(const Dataset& data) {
    if (cursor + batch > order.size()) shuffle();
    Dataset out{Matrix(batch, data.inputs.cols()), std::vector<int>(batch)};
    for (std::size_t r = 0; r < batch; ++r) {
      const std::size_t src = order[cursor + r];
      std::copy_n(data.inputs.row(src).begin(), data.inputs.cols(), out.inputs.row(r).begin());
      out.labels[r] = data.labels[src];
    }
    cursor += batch;
    return out;
  }

  std::vector<std::size_t> order;
  std::size_t batch;
  std::size_t cursor = 0;
  Rng rng;
};

TrainResult train_gauss_mix(const RunConfig& cfg) {
  TrainResult result;
  TaskSpec spec = cfg.task;
  spec.seed = cfg.seed;
  const GaussMix data = gauss_mix_generate(spec);
  Rng init = Rng::substream(cfg.seed, "init");
  Model model = make_mlp(spec.n, spec.m, spec.classes, cfg.depth, init);
  auto groups = route_params(model.params(), cfg.matrix_hyper, cfg.adam_hyper);
  std::size_t probe = groups.size();
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].is_matrix_param) {
      probe = k;
      break;
    }
  }
  if (probe == groups.size()) throw std::logic_error("model has no matrix parameter");

  MiniBatcher batches(data.train.inputs.rows(), cfg.batch_size, Rng::substream(cfg.seed, "minibatch"));
  const auto start = Clock::now();
  const auto val_loss = [&] { return model.loss(data.val.inputs, data.val.labels); };
  result.initial_val_loss = val_loss();
  result.best_val_loss = result.initial_val_loss;

  auto stamp = [&](TrainRecord& rec) {
    fill_row_stats(rec, groups[probe].weight);
    rec.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
  };

  {
    const Dataset mb = MiniBatcher(batches).next(data.train);
    auto fwd = model.forward(mb.inputs, mb.labels);
    const auto grads = model.backward(fwd.acts);
    TrainRecord rec;
    rec.loss = fwd.loss;
    rec.val_loss = result.initial_val_loss;
    rec.stochastic = true;
    rec.proj_grad_12 = norm_12(row_perp_project(grads[probe], groups[probe].weight));
    stamp(rec);
    result.records.push_back(rec);
  }

  for (long t = 1; t <= cfg.steps; ++t) {
    const Dataset mb = batches.next(data.train);
    auto fwd = model.forward(mb.inputs, mb.labels);
    if (!std::isfinite(fwd.loss)) {
      TrainRecord rec;
      rec.step = t;
      rec.loss = fwd.loss;
      rec.val_loss = std::numeric_limits<double>::quiet_NaN();
      stamp(rec);
      result.records.push_back(rec);
      result.aborted = true;
      result.diagnostic = "non-finite loss at step " + std::to_string(t);
      return result;
    }
    const auto grads = model.backward(fwd.acts);
    const double factor = schedule_factor(cfg, t);
    const double g12 = norm_12(row_perp_project(grads[probe], groups[probe].weight));
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const Hyper& base = groups[k].is_matrix_param ? cfg.matrix_hyper : cfg.adam_hyper;
      groups[k].hyper.lr = base.lr * factor;
      step(groups[k], grads[k]);
      model.mutable_param(k) = groups[k].weight;
    }
    if (t % cfg.eval_every == 0 || t == cfg.steps) {
      TrainRecord rec;
      rec.step = t;
      rec.loss = fwd.loss;
      rec.val_loss = val_loss();
      rec.stochastic = true;
      rec.proj_grad_12 = g12;
      rec.lr = cfg.matrix_hyper.lr * factor;
      stamp(rec);
      result.records.push_back(rec);
      if (!std::isfinite(rec.val_loss) || !finite_record(rec)) {
        result.aborted = true;
        result.diagnostic = "non-finite metrics at step " + std::to_string(t);
        return result;
      }
      result.best_val_loss = std::min(result.best_val_loss, rec.val_loss);
    }
  }
  return result;
}

}  // namespace

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.task.kind == TaskKind::gauss_mix) return train_gauss_mix(cfg);
  return train_sphere(cfg);
}

void write_records_csv(std::ostream& os, const std::vector<TrainRecord>& records) {
  os << "step,loss,val_loss,proj_grad_12,grad_kind,row_norm_min,row_norm_max,row_norm_mean,"
        "weight_fro_sq,lr,wall_ns\n";
  const auto old = os.precision(17);
  for (const auto& r : records) {
    os << r.step << ',' << r.loss << ',' << r.val_loss << ',' << r.proj_grad_12 << ','
       << (r.stochastic ? "stochastic" : "full") << ',' << r.row_norm_min << ',' << r.row_norm_max
       << ',' << r.row_norm_mean << ',' << r.weight_fro_sq << ',' << r.lr << ',' << r.wall_ns
       << '\n';
  }
  os.precision(old);
}

std::vector<AuditStep> record_sphere_trajectory(std::size_t m, std::size_t n, const Hyper& hyper,
                                                long steps, std::uint64_t seed) {
  const auto problem = make_sphere_align(m, n, seed);
  ParamGroup group("w", problem.w0, hyper, hyper.kind != OptimizerKind::adam);
  std::vector<AuditStep> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, steps)));
  for (long t = 0; t < steps; ++t) {
    LossGrad lg = sphere_align_loss_grad(group.weight, problem.targets);
    StepTrace trace;
    step(group, lg.grad, &trace);
    out.push_back({t, std::move(trace.weight_before), std::move(lg.grad), std::move(trace.momentum),
                   std::move(trace.projected), std::move(trace.direction)});
  }
  return out;
}

AuditReport lemma_audit(const std::vector<AuditStep>& trajectory, const AuditTolerances& tol) {
  AuditReport report;
  report.min_lower_bound_slack = std::numeric_limits<double>::infinity();
  auto fail = [&](long step, const std::string& what) {
    report.violations.push_back("step " + std::to_string(step) + ": " + what);
  };

  for (const auto& s : trajectory) {
    AuditStepFlags f;
    const Matrix& z = s.projected;
    const Matrix& d = s.direction;
    const double m = static_cast<double>(d.rows());

    // <z, d> = |z|_{1,2}
    const double zd = inner(z, d);
    const double z12 = norm_12(z);
    const double id_err = std::abs(zd - z12) / std::max(1.0, z12);
    report.max_identity_rel_error = std::max(report.max_identity_rel_error, id_err);
    if (id_err > tol.identity_rel) {
      f.identity = false;
      fail(s.step, "<v_perp, d> differs from |v_perp|_{1,2} by " + std::to_string(id_err));
    }
    if (zd < norm_fro(z) * (1.0 - tol.identity_rel) - tol.identity_rel) {
      f.fro_lower = false;
      fail(s.step, "<v_perp, d> below |v_perp|_F");
    }

    if (norm_fro(d) > std::sqrt(m) + tol.norm_bound) {
      f.fro_bound = false;
      fail(s.step, "|d|_F exceeds sqrt(m)");
    }
    if (norm_inf2(d) > 1.0 + tol.norm_bound) {
      f.inf2_bound = false;
      fail(s.step, "|d|_{inf,2} exceeds 1");
    }

    const auto dw = row_dot(d, s.weight);
    const auto wn = row_norms(s.weight);
    for (std::size_t i = 0; i < dw.size(); ++i) {
      const double scaled_err = std::abs(dw[i]) / std::max(1.0, wn[i]);
      report.max_orthogonality = std::max(report.max_orthogonality, scaled_err);
      if (scaled_err > tol.orthogonality) {
        f.orthogonal = false;
        fail(s.step, "row " + std::to_string(i) + " of d not orthogonal to w (" +
                         std::to_string(scaled_err) + ")");
      }
    }

    // Projection non-expansive on the momentum and on the gradient.
    const Matrix pv = row_perp_project(s.momentum, s.weight);
    const Matrix G = row_perp_project(s.grad, s.weight);
    auto check_nonexp = [&](const Matrix& px, const Matrix& x, const char* what) {
      const double r = 1.0 + tol.nonexpansive;
      if (norm_fro(px) > norm_fro(x) * r || norm_12(px) > norm_12(x) * r ||
          norm_inf2(px) > norm_inf2(x) * r) {
        f.nonexpansive = false;
        fail(s.step, std::string("projection expands ") + what);
      }
    };
    check_nonexp(pv, s.momentum, "momentum");
    check_nonexp(G, s.grad, "gradient");

    // <G, d> >= |G|_{1,2} - 2 |P_w(v_{t+1} - grad)|_{1,2}
    const Matrix ebar = row_perp_project(axpy(-1.0, s.grad, s.momentum), s.weight);
    f.error_12 = norm_12(ebar);
    f.lower_bound_slack = inner(G, d) - (norm_12(G) - 2.0 * f.error_12);
    report.min_lower_bound_slack = std::min(report.min_lower_bound_slack, f.lower_bound_slack);
    if (f.lower_bound_slack < -tol.lower_bound_slack) {
      f.lower_bound = false;
      fail(s.step, "(1,2) inner-product lower bound violated, slack " +
                       std::to_string(f.lower_bound_slack));
    }

    const double tangent_err = norm_fro(axpy(-1.0, s.grad, G)) / std::max(1.0, norm_fro(s.grad));
    report.max_tangent_error = std::max(report.max_tangent_error, tangent_err);
    if (tol.grad_is_tangent >= 0 && tangent_err > tol.grad_is_tangent) {
      f.tangent_grad = false;
      fail(s.step, "projected gradient differs from raw gradient");
    }
    report.steps.push_back(f);
  }
  if (trajectory.empty()) report.min_lower_bound_slack = 0.0;
  return report;
}

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line needs >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit_line: x values are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

ScalingReport scaling_experiment(const std::vector<std::size_t>& widths,
                                 const std::vector<std::uint64_t>& seeds,
                                 const ProbeOptions& options) {
  if (widths.size() < 4) throw std::invalid_argument("scaling experiment needs >= 4 widths");
  if (seeds.size() < 8) throw std::invalid_argument("scaling experiment needs >= 8 seeds");
  ScalingReport rep;
  rep.widths = widths;
  switch (options.direction) {
    case ProbeDirection::nora: rep.direction = "nora"; break;
    case ProbeDirection::rmnp: rep.direction = "rmnp"; break;
    case ProbeDirection::zero: rep.direction = "zero"; break;
  }
  const auto records = mup_probe(widths, seeds, options);
  std::vector<double> lx, ly;
  double constant = 0.0;
  for (std::size_t w = 0; w < widths.size(); ++w) {
    double sum = 0.0, ratio = 0.0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& r = records[w * seeds.size() + s];
      sum += r.inner;
      ratio += r.ratio;
    }
    const double mean = sum / static_cast<double>(seeds.size());
    rep.mean_inner.push_back(mean);
    rep.mean_ratio.push_back(ratio / static_cast<double>(seeds.size()));
    if (!(std::abs(mean) > 0)) rep.degenerate = true;
    lx.push_back(std::log(static_cast<double>(widths[w])));
    ly.push_back(std::log(std::abs(mean)));
    constant += std::abs(mean) / std::sqrt(static_cast<double>(widths[w]));
  }
  rep.constant = constant / static_cast<double>(widths.size());
  if (rep.degenerate) {
    rep.exponent = std::numeric_limits<double>::quiet_NaN();
    rep.intercept = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  std::tie(rep.exponent, rep.intercept) = fit_line(lx, ly);
  return rep;
}

std::string compare_markdown(const std::vector<CompareRow>& rows, const RunConfig& base) {
  std::ostringstream os;
  os << "Validation loss on gauss_mix (n=" << base.task.n << ", k=" << base.task.classes
     << ", hidden=" << base.task.m << ", steps=" << base.steps << ", seed=" << base.seed << ")\n\n";
  os << "| Optimizer | Weight decay | Best LR | Val loss | Untrained | Reduction |\n";
  os << "|---|---|---|---|---|---|\n";
  os << std::fixed;
  for (const auto& r : rows) {
    os << "| " << r.label << " | " << std::setprecision(1) << r.weight_decay << " | "
       << std::setprecision(4) << r.best_lr << " | " << std::setprecision(4) << r.best_val_loss
       << " | " << r.baseline_val_loss << " | " << std::setprecision(1) << 100.0 * r.reduction
       << "% |\n";
  }
  return os.str();
}

CompareReport compare_optimizers(const RunConfig& base, const std::vector<CompareEntry>& entries) {
  if (base.task.kind != TaskKind::gauss_mix) {
    throw std::invalid_argument("compare_optimizers runs on gauss_mix");
  }
  CompareReport report;
  for (const auto& e : entries) {
    if (e.lrs.empty()) throw std::invalid_argument("entry '" + e.label + "' has an empty lr grid");
    CompareRow row;
    row.label = e.label;
    row.optimizer = std::string(to_string(e.hyper.kind));
    row.weight_decay = e.hyper.weight_decay;
    row.best_val_loss = std::numeric_limits<double>::infinity();
    for (double lr : e.lrs) {
      RunConfig cfg = base;
      cfg.matrix_hyper = e.hyper;
      cfg.matrix_hyper.lr = lr;
      const TrainResult res = train(cfg);
      row.baseline_val_loss = res.initial_val_loss;
      row.aborted_any = row.aborted_any || res.aborted;
      if (!res.aborted && res.best_val_loss < row.best_val_loss) {
        row.best_val_loss = res.best_val_loss;
        row.best_lr = lr;
      }
    }
    row.reduction = 1.0 - row.best_val_loss / row.baseline_val_loss;
    report.rows.push_back(row);
  }
  report.markdown = compare_markdown(report.rows, base);
  return report;
}

}  // namespace nora
