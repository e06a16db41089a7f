#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace nora {

enum class Precision { f32, f64 };
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view name);

enum class BenchMethod { row_norm, ns5 };
std::string_view to_string(BenchMethod m);

struct BenchShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct ShapeLabel {
  std::string scale;  // model scale, e.g. "60M"
  std::string layer;  // representative layer
};

/// The twelve LLaMA-style weight shapes, 60M through 1B, by ascending scale.
std::vector<BenchShape> default_bench_shapes();
ShapeLabel label_for(const BenchShape& s);
/// Parses "512x512,1376x512".
std::vector<BenchShape> parse_shapes(const std::string& text);

struct BenchOptions {
  int warmup = 20;
  int iters = 200;
  Precision precision = Precision::f32;
  int ns_iters = 5;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct BenchResult {
  BenchShape shape;
  BenchMethod method = BenchMethod::row_norm;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double ratio_vs_rownorm = 1.0;
  Precision precision = Precision::f32;
  int warmup = 0;
  int iters = 0;
  /// Set when the clock resolution exceeds 1% of the measured mean.
  bool timer_warning = false;
};

/// Times row normalization against Newton-Schulz (Frobenius pre-scaled) on
/// the same random input per shape. Two results per shape, row_norm first.
std::vector<BenchResult> run_bench(const std::vector<BenchShape>& shapes, const BenchOptions& opts);

/// Markdown table: scale, shape, layer, row-norm ms, NS ms, NS / row-norm.
std::string bench_markdown(const std::vector<BenchResult>& results);
void write_bench_csv(std::ostream& os, const std::vector<BenchResult>& results);
std::vector<BenchResult> read_bench_csv(std::istream& is);

/// Fails with std::invalid_argument when `results` is empty.
void emit_report(const std::vector<BenchResult>& results, const std::string& markdown_path,
                 const std::string& csv_path);

}  // namespace nora
