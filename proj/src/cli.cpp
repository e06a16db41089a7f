#include "nora/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "nora/bench.hpp"
#include "nora/checks.hpp"
#include "nora/config.hpp"
#include "nora/harness.hpp"
#include "nora/linalg.hpp"
#include "nora/rng.hpp"

namespace nora {

namespace {

namespace fs = std::filesystem;

/// Raised by a subcommand when an asserted criterion fails.
struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Invocation {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  // bench conveniences, folded into overrides
  std::string shapes;
  std::optional<int> warmup;
  std::optional<int> iters;
  std::string precision;
};

AppConfig resolve(const Invocation& inv) {
  AppConfig cfg = inv.config_path.empty() ? AppConfig{} : load_config(inv.config_path);
  for (const auto& o : inv.overrides) apply_override(cfg, o);
  if (!inv.shapes.empty()) apply_override(cfg, "bench.shapes=" + inv.shapes);
  if (inv.warmup) apply_override(cfg, "bench.warmup=" + std::to_string(*inv.warmup));
  if (inv.iters) apply_override(cfg, "bench.iters=" + std::to_string(*inv.iters));
  if (!inv.precision.empty()) apply_override(cfg, "bench.precision=" + inv.precision);
  if (inv.seed) cfg.seed = *inv.seed;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') cfg.out_dir = env;
  if (!inv.out_dir.empty()) cfg.out_dir = inv.out_dir;
  cfg.finalize();
  return cfg;
}

fs::path prepare_out(const AppConfig& cfg, const std::string& command) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::ofstream os(dir / (command + ".cfg"));
  if (!os) throw std::runtime_error("cannot write " + (dir / (command + ".cfg")).string());
  os << "# effective configuration of `nora " << command << "`\n";
  write_config(os, cfg);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void cmd_check(const AppConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto results = run_property_suite(cfg.seed);
  auto report = open_out(dir / "check.txt");
  const CheckResult* first_fail = nullptr;
  for (const auto& r : results) {
    const std::string line = std::string(r.passed ? "PASS " : "FAIL ") + r.name + ": " + r.detail;
    out << line << '\n';
    report << line << '\n';
    if (!r.passed && first_fail == nullptr) first_fail = &r;
  }
  if (first_fail != nullptr) throw AssertionFailure(first_fail->name + ": " + first_fail->detail);
}

void cmd_train(const AppConfig& cfg, const fs::path& dir, std::ostream& out) {
  const TrainResult res = train(cfg.run);
  if (cfg.run.task.kind == TaskKind::gauss_mix) {
    TaskSpec spec = cfg.run.task;
    spec.seed = cfg.run.seed;
    const GaussMix data = gauss_mix_generate(spec);
    std::ostringstream meta;
    meta << "gauss_mix n=" << spec.n << " classes=" << spec.classes << " noise=" << spec.noise
         << " mean_scale=" << spec.mean_scale << " seed=" << spec.seed;
    write_dataset(dir / "gauss_mix_train.bin", data.train, meta.str() + " split=train");
    write_dataset(dir / "gauss_mix_val.bin", data.val, meta.str() + " split=val");
  }
  auto csv = open_out(dir / "train.csv");
  write_records_csv(csv, res.records);
  const auto& first = res.records.front();
  const auto& last = res.records.back();
  out << "task " << to_string(cfg.run.task.kind) << ", optimizer " << to_string(cfg.run.matrix_hyper.kind)
      << ", " << res.records.size() << " records -> " << (dir / "train.csv").string() << '\n';
  out << "loss " << first.loss << " -> " << last.loss << '\n';
  const double m = static_cast<double>(cfg.run.task.m);
  out << "mean |G|_{1,2}/m " << first.proj_grad_12 / m << " -> " << last.proj_grad_12 / m << '\n';
  if (res.aborted) throw AssertionFailure("training_finite: " + res.diagnostic);
  if (cfg.run.task.kind == TaskKind::sphere_align && cfg.train.max_grad_ratio > 0) {
    const double ratio = last.proj_grad_12 / first.proj_grad_12;
    if (!(ratio < cfg.train.max_grad_ratio)) {
      std::ostringstream os;
      os << "projected_gradient_decay: final/initial " << ratio << " >= " << cfg.train.max_grad_ratio;
      throw AssertionFailure(os.str());
    }
  }
}

void cmd_scale(const AppConfig& cfg, const fs::path& dir, std::ostream& out) {
  std::vector<std::uint64_t> seeds(cfg.scale.seeds);
  std::uint64_t state = cfg.seed;
  for (auto& s : seeds) s = splitmix64(state);
  const ScalingReport rep = scaling_experiment(cfg.scale.widths, seeds, cfg.scale.probe);
  auto csv = open_out(dir / "scale.csv");
  csv << "width,mean_inner,mean_ratio\n" << std::setprecision(17);
  for (std::size_t k = 0; k < rep.widths.size(); ++k) {
    csv << rep.widths[k] << ',' << rep.mean_inner[k] << ',' << rep.mean_ratio[k] << '\n';
  }
  out << "direction " << rep.direction << ", " << seeds.size() << " seeds per width\n";
  for (std::size_t k = 0; k < rep.widths.size(); ++k) {
    out << "  n=" << rep.widths[k] << "  <d,x>=" << rep.mean_inner[k] << "  ratio=" << rep.mean_ratio[k]
        << '\n';
  }
  if (rep.degenerate) {
    out << "exponent undefined (degenerate direction)\n";
    return;
  }
  out << "exponent " << rep.exponent << ", constant " << rep.constant
      << "; lr for unit activation change scales as 1/(" << rep.constant << " sqrt(n))\n";
  if (std::abs(rep.exponent - 0.5) > cfg.scale.exponent_tolerance) {
    std::ostringstream os;
    os << "width_exponent: " << rep.exponent << " outside 0.5 +/- " << cfg.scale.exponent_tolerance;
    throw AssertionFailure(os.str());
  }
  const double sign = cfg.scale.probe.delta >= 0 ? 1.0 : -1.0;
  const double r = sign * rep.mean_ratio.back();
  if (std::abs(r - 1.0) > cfg.scale.ratio_tolerance) {
    std::ostringstream os;
    os << "largest_width_ratio: signed ratio " << r << " outside 1 +/- " << cfg.scale.ratio_tolerance;
    throw AssertionFailure(os.str());
  }
}

void cmd_audit(const AppConfig& cfg, const fs::path& dir, std::ostream& out) {
  const Hyper& h = cfg.run.matrix_hyper;
  if (h.kind != OptimizerKind::nora || h.nora_mode != NoraMode::canonical) {
    throw ConfigError("<config>", 0, "optimizer.kind", "audit needs canonical nora");
  }
  const auto traj = record_sphere_trajectory(cfg.run.task.m, cfg.run.task.n, h, cfg.audit.steps, cfg.seed);
  const AuditReport rep = lemma_audit(traj, cfg.audit.tolerances);
  auto csv = open_out(dir / "audit.csv");
  csv << "step,identity,fro_bound,inf2_bound,orthogonal,nonexpansive,lower_bound,fro_lower,"
         "tangent_grad,lower_bound_slack,error_12\n"
      << std::setprecision(17);
  for (std::size_t k = 0; k < rep.steps.size(); ++k) {
    const auto& s = rep.steps[k];
    csv << k << ',' << s.identity << ',' << s.fro_bound << ',' << s.inf2_bound << ',' << s.orthogonal << ','
        << s.nonexpansive << ',' << s.lower_bound << ',' << s.fro_lower << ',' << s.tangent_grad << ','
        << s.lower_bound_slack << ',' << s.error_12 << '\n';
  }
  out << rep.steps.size() << " steps audited; min lower-bound slack " << rep.min_lower_bound_slack
      << ", max identity error " << rep.max_identity_rel_error << ", max orthogonality "
      << rep.max_orthogonality << '\n';
  if (!rep.passed()) {
    throw AssertionFailure("lemma_audit: " + rep.violations.front() + " (" +
                           std::to_string(rep.violations.size()) + " violations)");
  }
}

double mean_ratio_for_scale(const std::vector<BenchResult>& results, const std::string& scale) {
  double sum = 0.0;
  int count = 0;
  for (const auto& r : results) {
    if (r.method == BenchMethod::ns5 && label_for(r.shape).scale == scale) {
      sum += r.ratio_vs_rownorm;
      ++count;
    }
  }
  return count == 3 ? sum / count : std::nan("");
}

void cmd_bench(const AppConfig& cfg, const fs::path& dir, std::ostream& out) {
  const auto results = run_bench(cfg.bench.shapes, cfg.bench.options);
  emit_report(results, (dir / "bench.md").string(), (dir / "bench.csv").string());
  out << bench_markdown(results);
  const bool f32 = cfg.bench.options.precision == Precision::f32;
  out << "gemm: " << (f32 ? gemm_provider<float>() : gemm_provider<double>()) << ", "
      << to_string(cfg.bench.options.precision) << ", " << cfg.bench.options.threads << " thread(s)\n";
  bool warned = false;
  for (const auto& r : results) warned = warned || r.timer_warning;
  if (warned) out << "warning: timer resolution exceeds 1% of a measured mean\n";
  if (!cfg.bench.assert_ratios) return;
  for (const auto& r : results) {
    if (r.method != BenchMethod::ns5) continue;
    const std::string shape = std::to_string(r.shape.rows) + "x" + std::to_string(r.shape.cols);
    if (!(r.ratio_vs_rownorm > 1.0)) {
      throw AssertionFailure("rownorm_faster: " + shape + " ratio " + std::to_string(r.ratio_vs_rownorm));
    }
    if (r.shape.rows == 2048 && r.shape.cols == 5461 && !(r.ratio_vs_rownorm >= 10.0)) {
      throw AssertionFailure("largest_shape_ratio: " + shape + " ratio " +
                             std::to_string(r.ratio_vs_rownorm) + " < 10");
    }
  }
  const double small = mean_ratio_for_scale(results, "60M");
  const double large = mean_ratio_for_scale(results, "1B");
  if (std::isfinite(small) && std::isfinite(large) && !(large > small)) {
    throw AssertionFailure("ratio_grows_with_scale: 1B mean " + std::to_string(large) + " <= 60M mean " +
                           std::to_string(small));
  }
}

void cmd_compare(const AppConfig& cfg, const fs::path& dir, std::ostream& out) {
  RunConfig base = cfg.run;
  base.task.kind = TaskKind::gauss_mix;
  base.steps = cfg.compare.steps;
  base.task.n = cfg.compare.features;
  base.task.m = cfg.compare.hidden;
  base.validate();
  auto entry = [&](const char* label, OptimizerKind kind, const std::vector<double>& lrs, double wd) {
    Hyper h = cfg.run.matrix_hyper;
    h.kind = kind;
    h.weight_decay = wd;
    return CompareEntry{label, h, lrs};
  };
  const double wd = cfg.run.matrix_hyper.weight_decay;
  std::vector<CompareEntry> entries{entry("Nora", OptimizerKind::nora, cfg.compare.nora_lrs, wd)};
  if (cfg.compare.nora_extra_wd >= 0 && cfg.compare.nora_extra_wd != wd) {
    entries.push_back(entry("Nora", OptimizerKind::nora, cfg.compare.nora_lrs, cfg.compare.nora_extra_wd));
  }
  entries.push_back(entry("RMNP", OptimizerKind::rmnp, cfg.compare.rmnp_lrs, wd));
  entries.push_back(entry("Mano", OptimizerKind::mano, cfg.compare.mano_lrs, wd));
  entries.push_back(entry("Muon", OptimizerKind::muon, cfg.compare.muon_lrs, wd));

  const CompareReport rep = compare_optimizers(base, entries);
  open_out(dir / "compare.md") << rep.markdown;
  auto csv = open_out(dir / "compare.csv");
  csv << "label,optimizer,weight_decay,best_lr,best_val_loss,baseline_val_loss,reduction,aborted_any\n"
      << std::setprecision(17);
  for (const auto& r : rep.rows) {
    csv << r.label << ',' << r.optimizer << ',' << r.weight_decay << ',' << r.best_lr << ','
        << r.best_val_loss << ',' << r.baseline_val_loss << ',' << r.reduction << ',' << r.aborted_any << '\n';
  }
  out << rep.markdown;
  for (const auto& r : rep.rows) {
    if (!(r.reduction >= cfg.compare.min_reduction)) {
      std::ostringstream os;
      os << "loss_reduction: " << r.label << " (wd " << r.weight_decay << ") reduced val loss by "
         << 100.0 * r.reduction << "% < " << 100.0 * cfg.compare.min_reduction << "%";
      throw AssertionFailure(os.str());
    }
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Row-normalized optimizer toolkit: property checks, training, scaling, audit, benchmark"};
  app.require_subcommand(1);
  Invocation inv;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", inv.config_path, "Config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--seed", inv.seed, "Master seed (overrides the config)");
    sub->add_option("-o,--out", inv.out_dir,
                    std::string("Output directory (overrides config and ") + kOutDirEnv + ")");
    sub->add_option("overrides", inv.overrides, "section.key=value overrides");
  };
  const std::vector<std::pair<const char*, const char*>> commands{
      {"check", "Run the invariant, lemma and gradient property suite"},
      {"train", "Train on the configured task and write per-step records"},
      {"scale", "Width-scaling probe of <d, x>"},
      {"audit", "Check the step geometry along a sphere_align trajectory"},
      {"bench", "Time row normalization against Newton-Schulz"},
      {"compare", "Compare matrix optimizers on gauss_mix"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&inv, name = std::string(name)] { inv.command = name; });
    if (std::string(name) == "bench") {
      sub->add_option("--shapes", inv.shapes, "Comma-separated RxC list or 'default'");
      sub->add_option("--warmup", inv.warmup, "Warmup iterations");
      sub->add_option("--iters", inv.iters, "Measured iterations");
      sub->add_option("--precision", inv.precision, "f32 or f64");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    const AppConfig cfg = resolve(inv);
    const fs::path dir = prepare_out(cfg, inv.command);
    if (inv.command == "check") cmd_check(cfg, dir, out);
    if (inv.command == "train") cmd_train(cfg, dir, out);
    if (inv.command == "scale") cmd_scale(cfg, dir, out);
    if (inv.command == "audit") cmd_audit(cfg, dir, out);
    if (inv.command == "bench") cmd_bench(cfg, dir, out);
    if (inv.command == "compare") cmd_compare(cfg, dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const AssertionFailure& e) {
    err << "FAILED " << e.what() << '\n';
    return kExitAssertion;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitAssertion;
  }
  return kExitOk;
}

}  // namespace nora
