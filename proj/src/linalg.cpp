#include "nora/linalg.hpp"

#include <cblas.h>

#include <cmath>
#include <stdexcept>

#include "gemm.hpp"
#include "nora/kernels.hpp"

namespace nora {

namespace par = kernels::parallel;

template <typename T>
BasicMatrix<T> row_perp_project(const BasicMatrix<T>& x, const BasicMatrix<T>& w,
                                std::size_t* passthrough_rows) {
  require_same_shape(x, w, "row_perp_project");
  BasicMatrix<T> out(x.rows(), x.cols());
  const std::size_t skipped = par::row_perp_project(x, w, out);
  if (passthrough_rows != nullptr) *passthrough_rows = skipped;
  return out;
}

template <typename T>
BasicMatrix<T> row_normalize(const BasicMatrix<T>& x, T eps) {
  if (!(eps >= 0)) throw std::invalid_argument("row_normalize: eps must be >= 0");
  BasicMatrix<T> out(x.rows(), x.cols());
  par::row_normalize(x, eps, out);
  return out;
}

Matrix row_normalize_clamped(const Matrix& x, double eps) {
  Matrix out(x.rows(), x.cols());
  const auto norms = row_norms(x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double denom = std::max(norms[i], eps);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = denom > 0 ? x(i, j) / denom : 0.0;
  }
  return out;
}

template <typename T> T norm_fro(const BasicMatrix<T>& x) { return par::norm_fro(x); }
template <typename T> T norm_12(const BasicMatrix<T>& x) { return par::norm_12(x); }
template <typename T> T norm_inf2(const BasicMatrix<T>& x) { return par::norm_inf2(x); }

std::vector<double> row_dot(const Matrix& x, const Matrix& w) {
  std::vector<double> out(x.rows());
  par::row_dot(x, w, std::span<double>(out));
  return out;
}

std::vector<double> row_norms(const Matrix& x) {
  std::vector<double> out(x.rows());
  par::row_sqnorm(x, std::span<double>(out));
  for (auto& v : out) v = std::sqrt(v);
  return out;
}

double inner(const Matrix& a, const Matrix& b) {
  double total = 0;
  for (double v : row_dot(a, b)) total += v;
  return total;
}


template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b, GemmBackend backend) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: nonconforming shapes " + shape_str(a.rows(), a.cols()) +
                                " * " + shape_str(b.rows(), b.cols()));
  }
  BasicMatrix<T> out(a.rows(), b.cols());
  if (backend == GemmBackend::blas) {
    detail::fast_gemm(a, b, out);
  } else {
    par::matmul(a, b, out);
  }
  return out;
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(a.cols(), a.rows());
  par::transpose(a, out);
  return out;
}

Matrix axpy(double alpha, const Matrix& x, const Matrix& y) {
  require_same_shape(x, y, "axpy");
  Matrix out = y;
  auto o = out.data();
  auto xs = x.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += alpha * xs[k];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bs = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] *= bs[k];
  return out;
}

Matrix scaled(const Matrix& x, double alpha) {
  Matrix out = x;
  for (auto& v : out.data()) v *= alpha;
  return out;
}

namespace {

// Iterates on a wide (rows <= cols) matrix: X <- 1.5 X - 0.5 (X X^T) X.
template <typename T>
BasicMatrix<T> ns_wide(BasicMatrix<T> x, int iters, GemmBackend backend) {
  const std::size_t m = x.rows();
  BasicMatrix<T> gram(m, m);
  BasicMatrix<T> next(x.rows(), x.cols());
  for (int k = 0; k < iters; ++k) {
    if (backend == GemmBackend::blas) {
      detail::fast_ns_step(x, gram, next);
    } else {
      const BasicMatrix<T> xt = transpose(x);
      par::matmul(x, xt, gram);
      par::matmul(gram, x, next);
      auto nx = next.data();
      auto xs = x.data();
      for (std::size_t q = 0; q < nx.size(); ++q) nx[q] = T(1.5) * xs[q] - T(0.5) * nx[q];
    }
    std::swap(x, next);
  }
  return x;
}

}  // namespace

template <typename T>
BasicMatrix<T> newton_schulz(const BasicMatrix<T>& x, int iters, GemmBackend backend) {
  if (iters < 1) throw std::invalid_argument("newton_schulz: iters must be >= 1");
  if (x.rows() > x.cols()) {
    return transpose(ns_wide(transpose(x), iters, backend));
  }
  return ns_wide(x, iters, backend);
}

template <typename T>
BasicMatrix<T> orthogonalize(const BasicMatrix<T>& x, int iters, GemmBackend backend) {
  const T fro = norm_fro(x);
  if (!(fro > 0)) return BasicMatrix<T>(x.rows(), x.cols());
  BasicMatrix<T> x0 = x;
  for (auto& v : x0.data()) v /= fro;
  return newton_schulz(x0, iters, backend);
}

void set_blas_threads(int n) { openblas_set_num_threads(n); }

template <typename T>
std::string_view gemm_provider() {
  return detail::blas_verified<T>() ? "openblas" : "eigen";
}
template std::string_view gemm_provider<double>();
template std::string_view gemm_provider<float>();

#define NORA_INSTANTIATE(T)                                                                     \
  template BasicMatrix<T> row_perp_project<T>(const BasicMatrix<T>&, const BasicMatrix<T>&,     \
                                              std::size_t*);                                    \
  template BasicMatrix<T> row_normalize<T>(const BasicMatrix<T>&, T);                           \
  template T norm_fro<T>(const BasicMatrix<T>&);                                                \
  template T norm_12<T>(const BasicMatrix<T>&);                                                 \
  template T norm_inf2<T>(const BasicMatrix<T>&);                                               \
  template BasicMatrix<T> matmul<T>(const BasicMatrix<T>&, const BasicMatrix<T>&, GemmBackend); \
  template BasicMatrix<T> transpose<T>(const BasicMatrix<T>&);                                  \
  template BasicMatrix<T> newton_schulz<T>(const BasicMatrix<T>&, int, GemmBackend);            \
  template BasicMatrix<T> orthogonalize<T>(const BasicMatrix<T>&, int, GemmBackend);

NORA_INSTANTIATE(double)
NORA_INSTANTIATE(float)

#undef NORA_INSTANTIATE

}  // namespace nora
