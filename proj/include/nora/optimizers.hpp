#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nora/matrix.hpp"

namespace nora {

enum class OptimizerKind { nora, muon, rmnp, mano, adam };
enum class NoraMode {
  canonical,  // project raw momentum against w, decay inside the step
  reference,  // blended momentum, unit-row projection, shape scale, multiplicative decay
};

std::string_view to_string(OptimizerKind kind);
std::string_view to_string(NoraMode mode);
OptimizerKind parse_optimizer_kind(std::string_view name);
NoraMode parse_nora_mode(std::string_view name);

struct Hyper {
  double lr = 0.01;
  /// EMA coefficient of the momentum buffer.
  double momentum = 0.95;
  double weight_decay = 0.0;
  OptimizerKind kind = OptimizerKind::nora;
  int ns_iters = 5;
  std::pair<double, double> adam_betas{0.9, 0.95};
  double adam_eps = 1e-10;
  NoraMode nora_mode = NoraMode::canonical;
  /// Reference mode only: m_t = g + blend * (buf - g).
  double blend = 0.95;
  /// Reference mode only: eps of the row normalizations.
  double ref_eps = 1e-10;
  /// Threshold of the canonical row normalization (0 = exact 0/0 convention).
  double rn_eps = 0.0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct OptState {
  long step = 0;
  Matrix momentum_buf;
  std::optional<Matrix> adam_m;
  std::optional<Matrix> adam_v;
  /// Mano: true when the next step is row-wise (odd step count).
  bool parity = true;
  /// Diagnostics.
  long zero_weight_rows = 0;
  long skipped_updates = 0;

  static OptState zeros_like(const Matrix& w);
};

struct ParamGroup {
  std::string id;
  Matrix weight;
  Hyper hyper;
  OptState state;
  bool is_matrix_param = true;

  ParamGroup() = default;
  ParamGroup(std::string id, Matrix weight, Hyper hyper, bool is_matrix_param = true);
};

/// Intermediate quantities of one matrix-optimizer step, captured for audits.
struct StepTrace {
  Matrix weight_before;
  Matrix momentum;       // v_{t+1}
  Matrix projected;      // v^{r-perp} (momentum itself for RMNP/Muon)
  Matrix direction;      // d_t
  double lr = 0.0;
};

void nora_step(ParamGroup& group, const Matrix& grad, StepTrace* trace = nullptr);
void nora_ref_step(ParamGroup& group, const Matrix& grad, StepTrace* trace = nullptr);
void muon_step(ParamGroup& group, const Matrix& grad, StepTrace* trace = nullptr);
void rmnp_step(ParamGroup& group, const Matrix& grad, StepTrace* trace = nullptr);
void mano_step(ParamGroup& group, const Matrix& grad, StepTrace* trace = nullptr);
void adam_step(ParamGroup& group, const Matrix& grad);

/// Dispatches on group.hyper.kind (and nora_mode).
void step(ParamGroup& group, const Matrix& grad, StepTrace* trace = nullptr);

/// The Nora direction RN(P_w(v)) without any state update.
Matrix nora_direction(const Matrix& w, const Matrix& v, double rn_eps = 0.0);

struct NamedParam {
  std::string name;
  Matrix value;
  /// Logical tensor rank; 1-D tensors are stored as 1 x n.
  int ndim = 2;
};

/// Routes 2-D parameters whose names contain neither "embed" nor "lm_head" to
/// the matrix optimizer and everything else to Adam.
std::vector<ParamGroup> route_params(const std::vector<NamedParam>& params,
                                     const Hyper& matrix_hyper, const Hyper& adam_hyper);

bool is_matrix_route(const NamedParam& param);

}  // namespace nora
