#include "nora/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace nora {

ConfigError::ConfigError(std::string source, int line, std::string field, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         (field.empty() ? std::string() : ": " + field) + ": " + message),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Value parsers throw std::invalid_argument with a short reason.

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("expected a finite number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list element in '" + v + "'");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, ptr);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (k) out += ',';
    out += f(xs[k]);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(s));
  return out;
}

std::string_view probe_name(ProbeDirection d) {
  switch (d) {
    case ProbeDirection::nora: return "nora";
    case ProbeDirection::rmnp: return "rmnp";
    case ProbeDirection::zero: return "zero";
  }
  return "?";
}

ProbeDirection parse_probe(const std::string& v) {
  if (v == "nora") return ProbeDirection::nora;
  if (v == "rmnp") return ProbeDirection::rmnp;
  if (v == "zero") return ProbeDirection::zero;
  throw std::invalid_argument("unknown probe direction '" + v + "'");
}

std::string fmt_shapes(const std::vector<BenchShape>& shapes) {
  return join(shapes, [](const BenchShape& s) {
    return std::to_string(s.rows) + "x" + std::to_string(s.cols);
  });
}

struct Field {
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

// Hyper keys shared by [optimizer] and [adam].
void add_hyper(std::map<std::string, Field>& f, const std::string& sec, Hyper RunConfig::*member) {
  auto h = [member](AppConfig& c) -> Hyper& { return c.run.*member; };
  auto ch = [member](const AppConfig& c) -> const Hyper& { return c.run.*member; };
  f[sec + ".kind"] = {[=](AppConfig& c, const std::string& v) { h(c).kind = parse_optimizer_kind(v); },
                      [=](const AppConfig& c) { return std::string(to_string(ch(c).kind)); }};
  f[sec + ".lr"] = {[=](AppConfig& c, const std::string& v) { h(c).lr = to_double(v); },
                    [=](const AppConfig& c) { return fmt(ch(c).lr); }};
  f[sec + ".momentum"] = {[=](AppConfig& c, const std::string& v) { h(c).momentum = to_double(v); },
                          [=](const AppConfig& c) { return fmt(ch(c).momentum); }};
  f[sec + ".weight_decay"] = {
      [=](AppConfig& c, const std::string& v) { h(c).weight_decay = to_double(v); },
      [=](const AppConfig& c) { return fmt(ch(c).weight_decay); }};
  f[sec + ".ns_iters"] = {[=](AppConfig& c, const std::string& v) { h(c).ns_iters = to_int<int>(v); },
                          [=](const AppConfig& c) { return std::to_string(ch(c).ns_iters); }};
  f[sec + ".beta1"] = {[=](AppConfig& c, const std::string& v) { h(c).adam_betas.first = to_double(v); },
                       [=](const AppConfig& c) { return fmt(ch(c).adam_betas.first); }};
  f[sec + ".beta2"] = {[=](AppConfig& c, const std::string& v) { h(c).adam_betas.second = to_double(v); },
                       [=](const AppConfig& c) { return fmt(ch(c).adam_betas.second); }};
  f[sec + ".adam_eps"] = {[=](AppConfig& c, const std::string& v) { h(c).adam_eps = to_double(v); },
                          [=](const AppConfig& c) { return fmt(ch(c).adam_eps); }};
  f[sec + ".nora_mode"] = {
      [=](AppConfig& c, const std::string& v) { h(c).nora_mode = parse_nora_mode(v); },
      [=](const AppConfig& c) { return std::string(to_string(ch(c).nora_mode)); }};
  f[sec + ".blend"] = {[=](AppConfig& c, const std::string& v) { h(c).blend = to_double(v); },
                       [=](const AppConfig& c) { return fmt(ch(c).blend); }};
  f[sec + ".ref_eps"] = {[=](AppConfig& c, const std::string& v) { h(c).ref_eps = to_double(v); },
                         [=](const AppConfig& c) { return fmt(ch(c).ref_eps); }};
  f[sec + ".rn_eps"] = {[=](AppConfig& c, const std::string& v) { h(c).rn_eps = to_double(v); },
                        [=](const AppConfig& c) { return fmt(ch(c).rn_eps); }};
}

#define NORA_FIELD(key, expr, parse, format)                                            \
  f[key] = {[](AppConfig& c, const std::string& v) { c.expr = parse(v); },              \
            [](const AppConfig& c) { return format(c.expr); }}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }
std::string fmt_long(long v) { return std::to_string(v); }
std::string fmt_int(int v) { return std::to_string(v); }
std::string fmt_size(std::size_t v) { return std::to_string(v); }
std::string same(const std::string& v) { return v; }
std::string fmt_doubles(const std::vector<double>& xs) { return join(xs, fmt); }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    NORA_FIELD("seed", seed, to_int<std::uint64_t>, fmt_u64);
    NORA_FIELD("out_dir", out_dir, same, same);

    f["task.kind"] = {[](AppConfig& c, const std::string& v) { c.run.task.kind = parse_task_kind(v); },
                      [](const AppConfig& c) { return std::string(to_string(c.run.task.kind)); }};
    NORA_FIELD("task.m", run.task.m, to_int<std::size_t>, fmt_size);
    NORA_FIELD("task.n", run.task.n, to_int<std::size_t>, fmt_size);
    NORA_FIELD("task.classes", run.task.classes, to_int<std::size_t>, fmt_size);
    NORA_FIELD("task.noise", run.task.noise, to_double, fmt);
    NORA_FIELD("task.mean_scale", run.task.mean_scale, to_double, fmt);
    NORA_FIELD("task.train_samples", run.task.train_samples, to_int<std::size_t>, fmt_size);
    NORA_FIELD("task.val_samples", run.task.val_samples, to_int<std::size_t>, fmt_size);

    add_hyper(f, "optimizer", &RunConfig::matrix_hyper);
    add_hyper(f, "adam", &RunConfig::adam_hyper);

    NORA_FIELD("run.steps", run.steps, to_int<long>, fmt_long);
    f["run.schedule"] = {[](AppConfig& c, const std::string& v) { c.run.schedule = parse_schedule(v); },
                         [](const AppConfig& c) { return std::string(to_string(c.run.schedule)); }};
    NORA_FIELD("run.warmup_steps", run.warmup_steps, to_int<long>, fmt_long);
    NORA_FIELD("run.eval_every", run.eval_every, to_int<long>, fmt_long);
    NORA_FIELD("run.batch_size", run.batch_size, to_int<std::size_t>, fmt_size);
    NORA_FIELD("run.depth", run.depth, to_int<int>, fmt_int);

    NORA_FIELD("train.max_grad_ratio", train.max_grad_ratio, to_double, fmt);

    f["scale.widths"] = {
        [](AppConfig& c, const std::string& v) {
          c.scale.widths.clear();
          for (const auto& s : split_list(v)) c.scale.widths.push_back(to_int<std::size_t>(s));
        },
        [](const AppConfig& c) { return join(c.scale.widths, fmt_size); }};
    NORA_FIELD("scale.seeds", scale.seeds, to_int<std::size_t>, fmt_size);
    f["scale.direction"] = {
        [](AppConfig& c, const std::string& v) { c.scale.probe.direction = parse_probe(v); },
        [](const AppConfig& c) { return std::string(probe_name(c.scale.probe.direction)); }};
    NORA_FIELD("scale.sigma_w", scale.probe.sigma_w, to_double, fmt);
    NORA_FIELD("scale.sigma_x", scale.probe.sigma_x, to_double, fmt);
    NORA_FIELD("scale.delta", scale.probe.delta, to_double, fmt);
    NORA_FIELD("scale.exponent_tolerance", scale.exponent_tolerance, to_double, fmt);
    NORA_FIELD("scale.ratio_tolerance", scale.ratio_tolerance, to_double, fmt);

    NORA_FIELD("audit.steps", audit.steps, to_int<long>, fmt_long);
    NORA_FIELD("audit.identity_rel", audit.tolerances.identity_rel, to_double, fmt);
    NORA_FIELD("audit.norm_bound", audit.tolerances.norm_bound, to_double, fmt);
    NORA_FIELD("audit.orthogonality", audit.tolerances.orthogonality, to_double, fmt);
    NORA_FIELD("audit.nonexpansive", audit.tolerances.nonexpansive, to_double, fmt);
    NORA_FIELD("audit.lower_bound_slack", audit.tolerances.lower_bound_slack, to_double, fmt);
    NORA_FIELD("audit.grad_is_tangent", audit.tolerances.grad_is_tangent, to_double, fmt);

    f["bench.shapes"] = {
        [](AppConfig& c, const std::string& v) {
          c.bench.shapes = v == "default" ? default_bench_shapes() : parse_shapes(v);
        },
        [](const AppConfig& c) { return fmt_shapes(c.bench.shapes); }};
    NORA_FIELD("bench.warmup", bench.options.warmup, to_int<int>, fmt_int);
    NORA_FIELD("bench.iters", bench.options.iters, to_int<int>, fmt_int);
    f["bench.precision"] = {
        [](AppConfig& c, const std::string& v) { c.bench.options.precision = parse_precision(v); },
        [](const AppConfig& c) { return std::string(to_string(c.bench.options.precision)); }};
    NORA_FIELD("bench.ns_iters", bench.options.ns_iters, to_int<int>, fmt_int);
    NORA_FIELD("bench.threads", bench.options.threads, to_int<int>, fmt_int);
    NORA_FIELD("bench.assert_ratios", bench.assert_ratios, to_bool, fmt_bool);

    NORA_FIELD("compare.steps", compare.steps, to_int<long>, fmt_long);
    NORA_FIELD("compare.features", compare.features, to_int<std::size_t>, fmt_size);
    NORA_FIELD("compare.hidden", compare.hidden, to_int<std::size_t>, fmt_size);
    NORA_FIELD("compare.nora_lrs", compare.nora_lrs, to_doubles, fmt_doubles);
    NORA_FIELD("compare.rmnp_lrs", compare.rmnp_lrs, to_doubles, fmt_doubles);
    NORA_FIELD("compare.mano_lrs", compare.mano_lrs, to_doubles, fmt_doubles);
    NORA_FIELD("compare.muon_lrs", compare.muon_lrs, to_doubles, fmt_doubles);
    NORA_FIELD("compare.nora_extra_wd", compare.nora_extra_wd, to_double, fmt);
    NORA_FIELD("compare.min_reduction", compare.min_reduction, to_double, fmt);
    return f;
  }();
  return table;
}

#undef NORA_FIELD

void set_field(AppConfig& cfg, const std::string& key, const std::string& value,
               const std::string& source, int line) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError(source, line, key, "unknown key");
  try {
    it->second.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, line, key, e.what());
  } catch (const std::out_of_range&) {
    throw ConfigError(source, line, key, "value out of range");
  }
}

}  // namespace

void AppConfig::finalize() {
  run.seed = seed;
  run.task.seed = seed;
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError("<config>", 0, field, msg);
  };
  try {
    run.validate();
  } catch (const std::invalid_argument& e) {
    fail("run", e.what());
  }
  if (out_dir.empty()) fail("out_dir", "must not be empty");
  if (scale.widths.size() < 4) fail("scale.widths", "need at least 4 widths");
  for (auto w : scale.widths) {
    if (w == 0) fail("scale.widths", "widths must be positive");
  }
  if (scale.seeds < 8) fail("scale.seeds", "need at least 8 seeds");
  if (audit.steps < 1) fail("audit.steps", "must be >= 1");
  if (bench.options.iters < 10) fail("bench.iters", "must be >= 10");
  if (bench.options.warmup < 0) fail("bench.warmup", "must be >= 0");
  if (bench.options.threads < 1) fail("bench.threads", "must be >= 1");
  if (bench.options.ns_iters < 1) fail("bench.ns_iters", "must be >= 1");
  if (compare.steps < 1) fail("compare.steps", "must be >= 1");
  if (compare.features < run.task.classes) fail("compare.features", "must be >= task.classes");
  if (compare.hidden < 1) fail("compare.hidden", "must be >= 1");
  for (const auto* lrs : {&compare.nora_lrs, &compare.rmnp_lrs, &compare.mano_lrs, &compare.muon_lrs}) {
    for (double lr : *lrs) {
      if (!(lr > 0)) fail("compare", "learning rates must be > 0");
    }
  }
}

AppConfig parse_config(std::istream& is, const std::string& source) {
  AppConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, line_no, line, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& [key, _] : fields()) {
        if (key.starts_with(section + ".")) known = true;
      }
      if (section.empty() || !known) throw ConfigError(source, line_no, section, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, line, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line_no, "", "missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!seen.insert(full).second) throw ConfigError(source, line_no, full, "duplicate key");
    set_field(cfg, full, value, source, line_no);
  }
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError(path, 0, "", "cannot open config file");
  return parse_config(is, path);
}

void apply_override(AppConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("<override>", 0, assignment, "expected section.key=value");
  }
  set_field(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "<override>", 0);
}

void write_config(std::ostream& os, const AppConfig& cfg) {
  std::string section;
  for (const auto& key : config_keys()) {
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << (dot == std::string::npos ? key : key.substr(dot + 1)) << " = "
       << fields().at(key).get(cfg) << '\n';
  }
}

std::vector<std::string> config_keys() {
  // Top-level keys first so they precede every section header.
  std::vector<std::string> out;
  for (const auto& [key, _] : fields()) {
    if (key.find('.') == std::string::npos) out.push_back(key);
  }
  for (const auto& [key, _] : fields()) {
    if (key.find('.') != std::string::npos) out.push_back(key);
  }
  return out;
}

}  // namespace nora
