#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nora/optimizers.hpp"
#include "nora/tasks.hpp"

namespace nora {

enum class Schedule { constant, cosine_warmup };
std::string_view to_string(Schedule s);
Schedule parse_schedule(std::string_view name);

struct RunConfig {
  TaskSpec task;
  Hyper matrix_hyper;
  Hyper adam_hyper{.lr = 0.003, .kind = OptimizerKind::adam};
  long steps = 2000;
  Schedule schedule = Schedule::constant;
  long warmup_steps = 0;
  /// Master seed; task data, initialization and minibatches use named sub-streams of it.
  std::uint64_t seed = 0;
  long eval_every = 100;
  std::size_t batch_size = 256;  // gauss_mix
  int depth = 2;                 // gauss_mix hidden layers

  void validate() const;
};

/// Learning-rate multiplier in [0, 1] for step t (1-based); cosine decays to 0 at the last step.
double schedule_factor(const RunConfig& cfg, long t);

struct TrainRecord {
  long step = 0;
  double loss = 0.0;
  double val_loss = 0.0;      // gauss_mix only (NaN otherwise)
  double proj_grad_12 = 0.0;  // |P_w(grad)|_{1,2} of the first matrix parameter
  bool stochastic = false;    // proj_grad_12 from a minibatch gradient
  double row_norm_min = 0.0;
  double row_norm_max = 0.0;
  double row_norm_mean = 0.0;
  double weight_fro_sq = 0.0;  // sum of squared row norms
  double lr = 0.0;
  std::int64_t wall_ns = 0;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  bool aborted = false;
  std::string diagnostic;
  double initial_val_loss = 0.0;  // gauss_mix: untrained model
  double best_val_loss = 0.0;     // gauss_mix: best over eval steps
};

TrainResult train(const RunConfig& cfg);

/// CSV with header
/// step,loss,val_loss,proj_grad_12,grad_kind,row_norm_min,row_norm_max,row_norm_mean,weight_fro_sq,lr,wall_ns
void write_records_csv(std::ostream& os, const std::vector<TrainRecord>& records);

// ---- trajectories and the lemma audit ----

/// One optimizer step on a full-batch objective.
struct AuditStep {
  long step = 0;
  Matrix weight;      // w_t
  Matrix grad;        // full-batch gradient at w_t
  Matrix momentum;    // v_{t+1}
  Matrix projected;   // P_{w_t}(v_{t+1})
  Matrix direction;   // d_t
};

/// Runs `steps` updates of the given optimizer on sphere_align and captures
/// every intermediate quantity.
std::vector<AuditStep> record_sphere_trajectory(std::size_t m, std::size_t n, const Hyper& hyper,
                                                long steps, std::uint64_t seed);

struct AuditTolerances {
  double identity_rel = 1e-10;   // <v_perp, d> = |v_perp|_{1,2}
  double norm_bound = 1e-12;     // |d|_F <= sqrt(m), |d|_{inf,2} <= 1
  double orthogonality = 1e-10;  // |<d_i, w_i>| <= tol * max(1, |w_i|)
  double nonexpansive = 1e-12;   // relative
  double lower_bound_slack = 1e-9;
  /// When >= 0, also require |P_w(grad) - grad|_F <= tol * max(1, |grad|_F).
  double grad_is_tangent = -1.0;
};

struct AuditStepFlags {
  bool identity = true;
  bool fro_bound = true;
  bool inf2_bound = true;
  bool orthogonal = true;
  bool nonexpansive = true;
  bool lower_bound = true;
  bool fro_lower = true;  // <z, d> >= |z|_F
  bool tangent_grad = true;
  double lower_bound_slack = 0.0;
  double error_12 = 0.0;  // |P_w(v_{t+1} - grad)|_{1,2}
};

struct AuditReport {
  std::vector<AuditStepFlags> steps;
  std::vector<std::string> violations;  // "step 12 row 3: ..."
  double min_lower_bound_slack = 0.0;
  double max_identity_rel_error = 0.0;
  double max_orthogonality = 0.0;
  double max_tangent_error = 0.0;

  [[nodiscard]] bool passed() const noexcept { return violations.empty(); }
};

AuditReport lemma_audit(const std::vector<AuditStep>& trajectory, const AuditTolerances& tol = {});

// ---- width scaling ----

struct ScalingReport {
  std::vector<std::size_t> widths;
  std::vector<double> mean_inner;  // mean <d, x> per width
  std::vector<double> mean_ratio;  // mean <d, x> / (sigma_x sqrt(n)) per width
  double exponent = 0.0;           // slope of log|mean inner| vs log n
  double intercept = 0.0;
  /// Measured C in |delta h| ~ eta C sqrt(n); eta = eta0 / sqrt(n) with eta0 = target / C.
  double constant = 0.0;
  bool degenerate = false;
  std::string direction;
};

ScalingReport scaling_experiment(const std::vector<std::size_t>& widths,
                                 const std::vector<std::uint64_t>& seeds,
                                 const ProbeOptions& options = {});

/// Least-squares slope and intercept of y against x.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

// ---- optimizer comparison ----

struct CompareEntry {
  std::string label;
  Hyper hyper;
  std::vector<double> lrs;
};

struct CompareRow {
  std::string label;
  std::string optimizer;
  double weight_decay = 0.0;
  double best_lr = 0.0;
  double best_val_loss = 0.0;
  double baseline_val_loss = 0.0;
  double reduction = 0.0;  // 1 - best / baseline
  bool aborted_any = false;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::string markdown;
};

/// Trains every entry over its lr grid on the shared task/seed/schedule of
/// `base` and keeps the best validation loss per entry.
CompareReport compare_optimizers(const RunConfig& base, const std::vector<CompareEntry>& entries);

std::string compare_markdown(const std::vector<CompareRow>& rows, const RunConfig& base);

}  // namespace nora
