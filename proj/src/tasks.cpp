#include "nora/tasks.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "nora/linalg.hpp"

namespace nora {

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::sphere_align: return "sphere_align";
    case TaskKind::gauss_mix: return "gauss_mix";
    case TaskKind::mup_probe: return "mup_probe";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "sphere_align") return TaskKind::sphere_align;
  if (name == "gauss_mix") return TaskKind::gauss_mix;
  if (name == "mup_probe") return TaskKind::mup_probe;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

void TaskSpec::validate() const {
  if (m == 0 || n == 0) throw std::invalid_argument("task shapes must be positive");
  if (!(noise >= 0) || !std::isfinite(noise)) throw std::invalid_argument("noise must be >= 0");
  if (kind == TaskKind::gauss_mix) {
    if (classes < 2) throw std::invalid_argument("gauss_mix needs at least 2 classes");
    if (classes > n) throw std::invalid_argument("gauss_mix needs classes <= features");
    if (train_samples == 0 || val_samples == 0)
      throw std::invalid_argument("gauss_mix sample counts must be positive");
  }
}

LossGrad sphere_align_loss_grad(const Matrix& w, const Matrix& targets) {
  require_same_shape(w, targets, "sphere_align");
  LossGrad out;
  out.grad = Matrix(w.rows(), w.cols());
  const auto norms = row_norms(w);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    if (!(norms[i] > 0)) {
      throw std::invalid_argument("sphere_align: row " + std::to_string(i) + " of w is zero");
    }
    const double inv = 1.0 / norms[i];
    double cos = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) cos += w(i, j) * inv * targets(i, j);
    // 1/2 |w_hat - u|^2 = 1 - <w_hat, u> for unit u
    out.loss += 1.0 - cos;
    // grad_i = -(1/|w_i|) (u_i - <w_hat, u_i> w_hat)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      out.grad(i, j) = -inv * (targets(i, j) - cos * w(i, j) * inv);
    }
  }
  return out;
}

double sphere_align_loss(const Matrix& w, const Matrix& targets) {
  return sphere_align_loss_grad(w, targets).loss;
}

Matrix random_unit_rows(std::size_t m, std::size_t n, Rng& rng) {
  Matrix u = random_normal(m, n, rng);
  return row_normalize(u);
}

SphereAlignProblem make_sphere_align(std::size_t m, std::size_t n, std::uint64_t seed) {
  Rng task = Rng::substream(seed, "task");
  Rng init = Rng::substream(seed, "init");
  SphereAlignProblem p;
  p.targets = random_unit_rows(m, n, task);
  p.w0 = random_normal(m, n, init, 1.0 / std::sqrt(static_cast<double>(n)));
  return p;
}

namespace {

// Haar-distributed orthogonal matrix via modified Gram-Schmidt on a Gaussian.
Matrix random_orthogonal(std::size_t n, Rng& rng) {
  Matrix q = random_normal(n, n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d += q(i, j) * q(k, j);
      for (std::size_t j = 0; j < n; ++j) q(i, j) -= d * q(k, j);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += q(i, j) * q(i, j);
    s = std::sqrt(s);
    for (std::size_t j = 0; j < n; ++j) q(i, j) /= s;
  }
  return q;
}

Dataset sample_mix(const Matrix& means, std::size_t count, double noise, Rng& rng) {
  const std::size_t k = means.rows();
  const std::size_t n = means.cols();
  Dataset d{Matrix(count, n), std::vector<int>(count)};
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t c = r % k;
    d.labels[r] = static_cast<int>(c);
    for (std::size_t j = 0; j < n; ++j) d.inputs(r, j) = means(c, j) + noise * rng.normal();
  }
  return d;
}

}  // namespace

GaussMix gauss_mix_generate(const TaskSpec& spec) {
  TaskSpec s = spec;
  s.kind = TaskKind::gauss_mix;
  s.validate();
  Rng rng = Rng::substream(spec.seed, "task");
  const std::size_t k = spec.classes;
  const std::size_t n = spec.n;
  Matrix simplex(k, n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < k; ++j) {
      simplex(c, j) = spec.mean_scale * ((c == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(k));
    }
  }
  const Matrix rot = random_orthogonal(n, rng);
  GaussMix out;
  out.means = matmul(simplex, rot);
  out.train = sample_mix(out.means, spec.train_samples, spec.noise, rng);
  out.val = sample_mix(out.means, spec.val_samples, spec.noise, rng);
  return out;
}

namespace {

constexpr char kMagic[8] = {'N', 'O', 'R', 'A', 'D', 'S', '0', '1'};

template <typename U>
void put(std::ofstream& os, U v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::ifstream& is) {
  U v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (!is) throw std::runtime_error("dataset file truncated");
  return v;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data, const std::string& meta) {
  const bool has_labels = !data.labels.empty();
  if (has_labels && data.labels.size() != data.inputs.rows()) {
    throw std::invalid_argument("dataset label count does not match rows");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint64_t>(os, data.inputs.rows());
  put<std::uint64_t>(os, data.inputs.cols());
  put<std::uint64_t>(os, has_labels ? 1 : 0);
  for (double v : data.inputs.data()) put<double>(os, v);
  if (has_labels) {
    for (int y : data.labels) put<std::int64_t>(os, y);
  }
  std::ofstream side(path.string() + ".txt");
  side << meta;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a dataset file");
  }
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  const auto flag = get<std::uint64_t>(is);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = get<double>(is);
  Dataset d{Matrix(rows, cols, std::move(values)), {}};
  if (flag != 0) {
    d.labels.resize(rows);
    for (auto& y : d.labels) y = static_cast<int>(get<std::int64_t>(is));
  }
  return d;
}

std::vector<ProbeRecord> mup_probe(const std::vector<std::size_t>& widths,
                                   const std::vector<std::uint64_t>& seeds,
                                   const ProbeOptions& options) {
  std::vector<ProbeRecord> out;
  out.reserve(widths.size() * seeds.size());
  for (std::size_t n : widths) {
    if (n == 0) throw std::invalid_argument("probe width must be positive");
    const double nd = static_cast<double>(n);
    for (std::uint64_t seed : seeds) {
      Rng rng = Rng::substream(seed ^ (static_cast<std::uint64_t>(n) << 32), "probe");
      const Matrix w = random_normal(1, n, rng, options.sigma_w / std::sqrt(nd));
      const Matrix x = random_normal(1, n, rng, options.sigma_x);
      const Matrix g = scaled(x, options.delta);
      Matrix d(1, n);
      switch (options.direction) {
        case ProbeDirection::nora: d = row_normalize(row_perp_project(g, w)); break;
        case ProbeDirection::rmnp: d = row_normalize(g); break;
        case ProbeDirection::zero: break;
      }
      ProbeRecord rec;
      rec.width = n;
      rec.seed = seed;
      rec.delta = options.delta;
      rec.inner = inner(d, x);
      rec.ratio = rec.inner / (options.sigma_x * std::sqrt(nd));
      out.push_back(rec);
    }
  }
  return out;
}

}  // namespace nora
