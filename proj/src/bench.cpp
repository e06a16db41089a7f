#include "nora/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nora/kernels.hpp"
#include "nora/linalg.hpp"
#include "nora/rng.hpp"

namespace nora {

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view name) {
  if (name == "f32" || name == "float32") return Precision::f32;
  if (name == "f64" || name == "float64") return Precision::f64;
  throw std::invalid_argument("unknown precision '" + std::string(name) + "'");
}

std::string_view to_string(BenchMethod m) { return m == BenchMethod::row_norm ? "row_norm" : "ns5"; }

std::vector<BenchShape> default_bench_shapes() {
  return {{512, 512},   {1376, 512},  {512, 1376},  {768, 768},   {2048, 768},  {768, 2048},
          {1024, 1024}, {2816, 1024}, {1024, 2816}, {2048, 2048}, {5461, 2048}, {2048, 5461}};
}

ShapeLabel label_for(const BenchShape& s) {
  struct Known {
    std::size_t hidden, mlp;
    const char* scale;
  };
  static constexpr Known known[] = {
      {512, 1376, "60M"}, {768, 2048, "135M"}, {1024, 2816, "350M"}, {2048, 5461, "1B"}};
  for (const auto& k : known) {
    if (s.rows == k.hidden && s.cols == k.hidden) return {k.scale, "attention: hidden x hidden"};
    if (s.rows == k.mlp && s.cols == k.hidden) return {k.scale, "MLP: intermediate x hidden"};
    if (s.rows == k.hidden && s.cols == k.mlp) return {k.scale, "MLP: hidden x intermediate"};
  }
  return {"-", "custom"};
}

std::vector<BenchShape> parse_shapes(const std::string& text) {
  std::vector<BenchShape> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto x = item.find('x');
    if (x == std::string::npos) throw std::invalid_argument("bad shape '" + item + "', expected RxC");
    try {
      std::size_t used = 0;
      BenchShape s{std::stoul(item.substr(0, x), &used), 0};
      if (used != x) throw std::invalid_argument("");
      const std::string rest = item.substr(x + 1);
      s.cols = std::stoul(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("");
      if (s.rows == 0 || s.cols == 0) throw std::invalid_argument("");
      out.push_back(s);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad shape '" + item + "', expected RxC");
    }
  }
  if (out.empty()) throw std::invalid_argument("no shapes given");
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

volatile double g_sink = 0.0;

double clock_resolution_ms() {
  // Smallest observable nonzero tick.
  auto best = Clock::duration::max();
  for (int k = 0; k < 64; ++k) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, b - a);
  }
  return std::chrono::duration<double, std::milli>(best).count();
}

struct Timing {
  double mean = 0.0;
  double std = 0.0;
};

template <typename F>
Timing time_it(F&& kernel, int warmup, int iters) {
  for (int k = 0; k < warmup; ++k) g_sink = g_sink + kernel();
  std::vector<double> samples(static_cast<std::size_t>(iters));
  for (auto& s : samples) {
    const auto t0 = Clock::now();
    const double v = kernel();
    const auto t1 = Clock::now();
    g_sink = g_sink + v;
    s = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  Timing t;
  for (double s : samples) t.mean += s;
  t.mean /= static_cast<double>(samples.size());
  for (double s : samples) t.std += (s - t.mean) * (s - t.mean);
  t.std = samples.size() > 1 ? std::sqrt(t.std / static_cast<double>(samples.size() - 1)) : 0.0;
  return t;
}

template <typename T>
std::pair<Timing, Timing> bench_shape(const BenchShape& shape, const BenchOptions& opts) {
  Rng rng = Rng::substream(opts.seed ^ (shape.rows * 1000003u + shape.cols), "bench");
  const BasicMatrix<T> x = random_normal(shape.rows, shape.cols, rng).template cast<T>();
  BasicMatrix<T> out(shape.rows, shape.cols);
  const Timing rn = time_it(
      [&] {
        kernels::parallel::row_normalize(x, T{0}, out);
        return static_cast<double>(out(0, 0));
      },
      opts.warmup, opts.iters);
  const Timing ns = time_it(
      [&] {
        const auto y = orthogonalize(x, opts.ns_iters, GemmBackend::blas);
        return static_cast<double>(y(0, 0));
      },
      opts.warmup, opts.iters);
  return {rn, ns};
}

}  // namespace

std::vector<BenchResult> run_bench(const std::vector<BenchShape>& shapes, const BenchOptions& opts) {
  if (opts.iters < 10) throw std::invalid_argument("bench needs iters >= 10");
  if (opts.warmup < 0) throw std::invalid_argument("warmup must be >= 0");
  if (opts.threads < 1) throw std::invalid_argument("threads must be >= 1");
  set_blas_threads(opts.threads);
  kernels::parallel::set_threads(opts.threads);
  const double resolution = clock_resolution_ms();

  std::vector<BenchResult> results;
  for (const auto& shape : shapes) {
    const auto [rn, ns] = opts.precision == Precision::f32 ? bench_shape<float>(shape, opts)
                                                           : bench_shape<double>(shape, opts);
    BenchResult base{shape, BenchMethod::row_norm, rn.mean, rn.std, 1.0, opts.precision,
                     opts.warmup, opts.iters, resolution > 0.01 * rn.mean};
    BenchResult nsr{shape, BenchMethod::ns5, ns.mean, ns.std, ns.mean / rn.mean, opts.precision,
                    opts.warmup, opts.iters, resolution > 0.01 * ns.mean};
    results.push_back(base);
    results.push_back(nsr);
  }
  return results;
}

std::string bench_markdown(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  os << "| Model scale | Matrix shape | Representative layer | Row normalization (ms) | NS(5) (ms) "
        "| NS / row-norm |\n";
  os << "|---|---|---|---|---|---|\n";
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    if (r.method != BenchMethod::row_norm) continue;
    const BenchResult* ns = nullptr;
    for (const auto& q : results) {
      if (q.method == BenchMethod::ns5 && q.shape.rows == r.shape.rows && q.shape.cols == r.shape.cols) {
        ns = &q;
        break;
      }
    }
    if (ns == nullptr) continue;
    const auto label = label_for(r.shape);
    os << "| " << label.scale << " | " << r.shape.rows << " x " << r.shape.cols << " | "
       << label.layer << " | " << std::fixed << std::setprecision(4) << r.mean_ms << " | "
       << ns->mean_ms << " | " << std::setprecision(2) << ns->ratio_vs_rownorm << "x"
       << (r.timer_warning || ns->timer_warning ? " (timer)" : "") << " |\n";
  }
  return os.str();
}

void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& results) {
  os << "rows,cols,scale,layer,method,precision,mean_ms,std_ms,ratio_vs_rownorm,warmup,iters,"
        "timer_warning\n";
  const auto old = os.precision(17);
  for (const auto& r : results) {
    const auto label = label_for(r.shape);
    os << r.shape.rows << ',' << r.shape.cols << ',' << label.scale << ',' << label.layer << ','
       << to_string(r.method) << ',' << to_string(r.precision) << ',' << r.mean_ms << ','
       << r.std_ms << ',' << r.ratio_vs_rownorm << ',' << r.warmup << ',' << r.iters << ','
       << (r.timer_warning ? 1 : 0) << '\n';
  }
  os.precision(old);
}

std::vector<BenchResult> read_bench_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty bench csv");
  std::vector<BenchResult> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw std::invalid_argument("bench csv row has " + std::to_string(cells.size()) + " cells");
    BenchResult r;
    r.shape = {std::stoul(cells[0]), std::stoul(cells[1])};
    if (cells[4] == "row_norm") {
      r.method = BenchMethod::row_norm;
    } else if (cells[4] == "ns5") {
      r.method = BenchMethod::ns5;
    } else {
      throw std::invalid_argument("unknown bench method '" + cells[4] + "'");
    }
    r.precision = parse_precision(cells[5]);
    r.mean_ms = std::strtod(cells[6].c_str(), nullptr);
    r.std_ms = std::strtod(cells[7].c_str(), nullptr);
    r.ratio_vs_rownorm = std::strtod(cells[8].c_str(), nullptr);
    r.warmup = std::stoi(cells[9]);
    r.iters = std::stoi(cells[10]);
    r.timer_warning = cells[11] == "1";
    out.push_back(r);
  }
  return out;
}

void emit_report(const std::vector<BenchResult>& results, const std::string& markdown_path,
                 const std::string& csv_path) {
  if (results.empty()) throw std::invalid_argument("no benchmark results to report");
  std::ofstream md(markdown_path);
  if (!md) throw std::runtime_error("cannot write " + markdown_path);
  md << bench_markdown(results);
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  write_bench_csv(csv, results);
}

}  // namespace nora
