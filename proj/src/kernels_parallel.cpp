#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nora/kernels.hpp"

namespace nora::kernels::parallel {

namespace {

// Below this many entries the fork/join cost dominates.
constexpr std::size_t kMinParallelWork = 1u << 14;

inline bool worth_it(std::size_t work) { return work >= kMinParallelWork; }

template <typename T>
inline T dot_row(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t j = 0; j < n; ++j) acc += a[j] * b[j];
  return acc;
}

template <typename T>
std::vector<T> row_sqnorms(const BasicMatrix<T>& x) {
  std::vector<T> out(x.rows());
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
  const std::size_t n = x.cols();
  const T* base = x.data().data();
#pragma omp parallel for schedule(static) if (worth_it(x.size()))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const T* r = base + static_cast<std::size_t>(i) * n;
    out[static_cast<std::size_t>(i)] = dot_row(r, r, n);
  }
  return out;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

template <typename T>
void row_dot(const BasicMatrix<T>& x, const BasicMatrix<T>& w, std::span<T> out) {
  require_same_shape(x, w, "row_dot");
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
  const std::size_t n = x.cols();
#pragma omp parallel for schedule(static) if (worth_it(x.size()))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = dot_row(x.row(r).data(), w.row(r).data(), n);
  }
}

template <typename T>
void row_sqnorm(const BasicMatrix<T>& x, std::span<T> out) {
  const auto norms = row_sqnorms(x);
  std::copy(norms.begin(), norms.end(), out.begin());
}

template <typename T>
std::size_t row_perp_project(const BasicMatrix<T>& x, const BasicMatrix<T>& w, BasicMatrix<T>& out) {
  require_same_shape(x, w, "row_perp_project");
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
  const std::size_t n = x.cols();
  std::size_t passthrough = 0;
#pragma omp parallel for schedule(static) reduction(+ : passthrough) if (worth_it(x.size()))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const T* xr = x.row(r).data();
    const T* wr = w.row(r).data();
    T* o = out.row(r).data();
    T xw = 0, ww = 0;
    for (std::size_t j = 0; j < n; ++j) {
      xw += xr[j] * wr[j];
      ww += wr[j] * wr[j];
    }
    if (!(ww > 0)) {
      ++passthrough;
      for (std::size_t j = 0; j < n; ++j) o[j] = xr[j];
      continue;
    }
    T xx = 0, ow = 0, oo = 0;
    const T c = xw / ww;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = xr[j] - c * wr[j];
      xx += xr[j] * xr[j];
    }
    for (std::size_t j = 0; j < n; ++j) ow += o[j] * wr[j];
    const T c2 = ow / ww;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] -= c2 * wr[j];
      oo += o[j] * o[j];
    }
    const T tol = flush_tolerance<T>(n);
    if (oo <= tol * tol * xx) {
      for (std::size_t j = 0; j < n; ++j) o[j] = T{0};
    }
  }
  return passthrough;
}

template <typename T>
void row_normalize(const BasicMatrix<T>& x, T eps, BasicMatrix<T>& out) {
  const auto rows = static_cast<std::ptrdiff_t>(x.rows());
  const std::size_t n = x.cols();
#pragma omp parallel for schedule(static) if (worth_it(x.size()))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    const T* xr = x.row(r).data();
    T* o = out.row(r).data();
    const T norm = std::sqrt(dot_row(xr, xr, n));
    if (norm > eps && static_cast<double>(norm) > kTinyRowNorm) {
      for (std::size_t j = 0; j < n; ++j) o[j] = xr[j] / norm;
    } else {
      for (std::size_t j = 0; j < n; ++j) o[j] = T{0};
    }
  }
}

template <typename T>
T norm_fro(const BasicMatrix<T>& x) {
  T total = 0;
  for (T s : row_sqnorms(x)) total += s;
  return std::sqrt(total);
}

template <typename T>
T norm_12(const BasicMatrix<T>& x) {
  T total = 0;
  for (T s : row_sqnorms(x)) total += std::sqrt(s);
  return total;
}

template <typename T>
T norm_inf2(const BasicMatrix<T>& x) {
  T best = 0;
  for (T s : row_sqnorms(x)) best = std::max(best, std::sqrt(s));
  return best;
}

template <typename T>
void matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b, BasicMatrix<T>& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols()) {
    throw std::invalid_argument("matmul: nonconforming shapes " + shape_str(a.rows(), a.cols()) +
                                " * " + shape_str(b.rows(), b.cols()));
  }
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
#pragma omp parallel for schedule(static) if (worth_it(a.rows() * inner * n))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    T* o = out.row(r).data();
    for (std::size_t j = 0; j < n; ++j) o[j] = 0;
    const T* ar = a.row(r).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = ar[k];
      const T* br = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
    }
  }
}

template <typename T>
void transpose(const BasicMatrix<T>& a, BasicMatrix<T>& out) {
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (worth_it(a.size()))
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, r) = a(r, j);
  }
}

#define NORA_INSTANTIATE(T)                                                                    \
  template void row_dot<T>(const BasicMatrix<T>&, const BasicMatrix<T>&, std::span<T>);        \
  template void row_sqnorm<T>(const BasicMatrix<T>&, std::span<T>);                            \
  template std::size_t row_perp_project<T>(const BasicMatrix<T>&, const BasicMatrix<T>&,       \
                                           BasicMatrix<T>&);                                   \
  template void row_normalize<T>(const BasicMatrix<T>&, T, BasicMatrix<T>&);                   \
  template T norm_fro<T>(const BasicMatrix<T>&);                                               \
  template T norm_12<T>(const BasicMatrix<T>&);                                                \
  template T norm_inf2<T>(const BasicMatrix<T>&);                                              \
  template void matmul<T>(const BasicMatrix<T>&, const BasicMatrix<T>&, BasicMatrix<T>&);      \
  template void transpose<T>(const BasicMatrix<T>&, BasicMatrix<T>&);

NORA_INSTANTIATE(double)
NORA_INSTANTIATE(float)

#undef NORA_INSTANTIATE

}  // namespace nora::kernels::parallel
