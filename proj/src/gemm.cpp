#include "gemm.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>
#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace nora::detail {

namespace {

template <typename T>
using RowMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstRowMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T>
ConstRowMap<T> view(const BasicMatrix<T>& x) {
  return ConstRowMap<T>(x.data().data(), static_cast<Eigen::Index>(x.rows()),
                        static_cast<Eigen::Index>(x.cols()));
}
template <typename T>
RowMap<T> view(BasicMatrix<T>& x) {
  return RowMap<T>(x.data().data(), static_cast<Eigen::Index>(x.rows()),
                   static_cast<Eigen::Index>(x.cols()));
}

int dim(std::size_t n) { return static_cast<int>(n); }

void blas_gemm(const BasicMatrix<double>& a, const BasicMatrix<double>& b, BasicMatrix<double>& out) {
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, dim(a.rows()), dim(b.cols()), dim(a.cols()), 1.0,
              a.data().data(), dim(a.cols()), b.data().data(), dim(b.cols()), 0.0, out.data().data(),
              dim(out.cols()));
}
void blas_gemm(const BasicMatrix<float>& a, const BasicMatrix<float>& b, BasicMatrix<float>& out) {
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, dim(a.rows()), dim(b.cols()), dim(a.cols()), 1.0f,
              a.data().data(), dim(a.cols()), b.data().data(), dim(b.cols()), 0.0f, out.data().data(),
              dim(out.cols()));
}

// gram <- x x^T, upper triangle only.
void blas_syrk(const BasicMatrix<double>& x, BasicMatrix<double>& gram) {
  cblas_dsyrk(CblasRowMajor, CblasUpper, CblasNoTrans, dim(x.rows()), dim(x.cols()), 1.0, x.data().data(),
              dim(x.cols()), 0.0, gram.data().data(), dim(gram.cols()));
}
void blas_syrk(const BasicMatrix<float>& x, BasicMatrix<float>& gram) {
  cblas_ssyrk(CblasRowMajor, CblasUpper, CblasNoTrans, dim(x.rows()), dim(x.cols()), 1.0f, x.data().data(),
              dim(x.cols()), 0.0f, gram.data().data(), dim(gram.cols()));
}

// out <- alpha * gram * x + beta * out, gram symmetric with the upper triangle stored.
void blas_symm(double alpha, const BasicMatrix<double>& gram, const BasicMatrix<double>& x, double beta,
               BasicMatrix<double>& out) {
  cblas_dsymm(CblasRowMajor, CblasLeft, CblasUpper, dim(x.rows()), dim(x.cols()), alpha, gram.data().data(),
              dim(gram.cols()), x.data().data(), dim(x.cols()), beta, out.data().data(), dim(out.cols()));
}
void blas_symm(float alpha, const BasicMatrix<float>& gram, const BasicMatrix<float>& x, float beta,
               BasicMatrix<float>& out) {
  cblas_ssymm(CblasRowMajor, CblasLeft, CblasUpper, dim(x.rows()), dim(x.cols()), alpha, gram.data().data(),
              dim(gram.cols()), x.data().data(), dim(x.cols()), beta, out.data().data(), dim(out.cols()));
}

template <typename T>
BasicMatrix<T> probe_matrix(std::size_t r, std::size_t c, double phase) {
  BasicMatrix<T> x(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) x(i, j) = static_cast<T>(std::sin(phase + 0.37 * i + 1.13 * j));
  }
  return x;
}

template <typename T>
BasicMatrix<T> naive_gemm(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  BasicMatrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<T>(s);
    }
  }
  return out;
}

template <typename T>
bool close(const BasicMatrix<T>& got, const BasicMatrix<T>& want, std::size_t inner) {
  const double tol = 8.0 * static_cast<double>(inner) * std::numeric_limits<T>::epsilon();
  for (std::size_t k = 0; k < got.size(); ++k) {
    if (!(std::abs(static_cast<double>(got.data()[k]) - want.data()[k]) <= tol)) return false;
  }
  return true;
}

// Shapes chosen to reach the small-matrix and blocked kernel paths.
template <typename T>
bool run_probe() {
  constexpr std::size_t shapes[][3] = {{64, 64, 256}, {200, 30, 500}, {37, 300, 91}, {256, 256, 64}};
  for (const auto& s : shapes) {
    const auto a = probe_matrix<T>(s[0], s[1], 0.1);
    const auto b = probe_matrix<T>(s[1], s[2], 0.7);
    BasicMatrix<T> out(s[0], s[2]);
    blas_gemm(a, b, out);
    if (!close(out, naive_gemm(a, b), s[1])) return false;
  }
  for (const auto& s : shapes) {
    const auto x = probe_matrix<T>(s[0], s[1], 0.3);
    BasicMatrix<T> gram(s[0], s[0]);
    blas_syrk(x, gram);
    BasicMatrix<T> xt(s[1], s[0]);
    for (std::size_t i = 0; i < s[0]; ++i) {
      for (std::size_t j = 0; j < s[1]; ++j) xt(j, i) = x(i, j);
    }
    const auto want = naive_gemm(x, xt);
    for (std::size_t i = 0; i < s[0]; ++i) {
      for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
    }
    if (!close(gram, want, s[1])) return false;
    BasicMatrix<T> next(s[0], s[1]);
    blas_symm(T(1), gram, x, T(0), next);
    if (!close(next, naive_gemm(want, x), s[0] * s[1])) return false;
  }
  return true;
}

}  // namespace

template <typename T>
bool blas_verified() {
  static const bool ok = run_probe<T>();
  return ok;
}

template <typename T>
void fast_gemm(const BasicMatrix<T>& a, const BasicMatrix<T>& b, BasicMatrix<T>& out) {
  if (blas_verified<T>()) {
    blas_gemm(a, b, out);
  } else {
    view(out).noalias() = view(a) * view(b);
  }
}

template <typename T>
void fast_ns_step(const BasicMatrix<T>& x, BasicMatrix<T>& gram, BasicMatrix<T>& next) {
  if (blas_verified<T>()) {
    next = x;
    blas_syrk(x, gram);
    blas_symm(T(-0.5), gram, x, T(1.5), next);
  } else {
    auto g = view(gram);
    g.noalias() = view(x) * view(x).transpose();
    auto n = view(next);
    n.noalias() = g * view(x);
    n = T(1.5) * view(x) - T(0.5) * n;
  }
}

template bool blas_verified<double>();
template bool blas_verified<float>();
template void fast_gemm<double>(const BasicMatrix<double>&, const BasicMatrix<double>&, BasicMatrix<double>&);
template void fast_gemm<float>(const BasicMatrix<float>&, const BasicMatrix<float>&, BasicMatrix<float>&);
template void fast_ns_step<double>(const BasicMatrix<double>&, BasicMatrix<double>&, BasicMatrix<double>&);
template void fast_ns_step<float>(const BasicMatrix<float>&, BasicMatrix<float>&, BasicMatrix<float>&);

}  // namespace nora::detail
