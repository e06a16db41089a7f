#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nora/bench.hpp"
#include "nora/harness.hpp"

namespace nora {

/// Malformed configuration text or override. `line` is 0 for overrides and
/// programmatic errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, int line, std::string field, const std::string& message);

  [[nodiscard]] const std::string& source() const noexcept { return source_; }
  [[nodiscard]] int line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  int line_;
  std::string field_;
};

struct TrainSettings {
  /// sphere_align: fail when the final |G|_{1,2} exceeds this fraction of the
  /// initial one. <= 0 disables the check.
  double max_grad_ratio = 0.1;
};

struct ScaleSettings {
  std::vector<std::size_t> widths{256, 512, 1024, 2048, 4096, 8192, 16384};
  std::size_t seeds = 32;
  ProbeOptions probe;
  double exponent_tolerance = 0.05;
  double ratio_tolerance = 0.05;
};

struct AuditSettings {
  long steps = 500;
  AuditTolerances tolerances;
};

struct BenchSettings {
  std::vector<BenchShape> shapes = default_bench_shapes();
  BenchOptions options{.warmup = 3, .iters = 10};
  bool assert_ratios = true;
};

struct CompareSettings {
  /// Per-run gauss_mix setup; classes, noise and sample counts come from [task].
  long steps = 600;
  std::size_t features = 64;
  std::size_t hidden = 64;
  std::vector<double> nora_lrs{0.003, 0.01, 0.03};
  std::vector<double> rmnp_lrs{0.003, 0.01, 0.03};
  std::vector<double> mano_lrs{0.003, 0.01, 0.03};
  std::vector<double> muon_lrs{0.003, 0.01, 0.03};
  /// Extra Nora row with this weight decay (< 0 disables).
  double nora_extra_wd = 0.1;
  double min_reduction = 0.5;
};

/// Everything a CLI invocation can be configured with. `seed` is the single
/// master seed; `run.seed` mirrors it after finalize().
struct AppConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "nora_out";
  RunConfig run;
  TrainSettings train;
  ScaleSettings scale;
  AuditSettings audit;
  BenchSettings bench;
  CompareSettings compare;

  /// Propagates the master seed and validates cross-field constraints.
  void finalize();
};

/// Parses the config grammar (see README). Unknown sections or keys, bad
/// values and duplicate keys throw ConfigError naming the line and field.
AppConfig parse_config(std::istream& is, const std::string& source = "<config>");
AppConfig load_config(const std::string& path);

/// Applies one "section.key=value" (or "key=value" for top-level keys).
void apply_override(AppConfig& cfg, const std::string& assignment);

/// Writes every key in canonical form; parse_config() of the output yields an
/// identical configuration.
void write_config(std::ostream& os, const AppConfig& cfg);

/// All recognized keys, fully qualified ("run.steps", "seed", ...).
std::vector<std::string> config_keys();

}  // namespace nora
