#include <cmath>

#include "nora/kernels.hpp"

namespace nora::kernels::serial {

template <typename T>
void row_dot(const BasicMatrix<T>& x, const BasicMatrix<T>& w, std::span<T> out) {
  require_same_shape(x, w, "row_dot");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j) * w(i, j);
    out[i] = acc;
  }
}

template <typename T>
void row_sqnorm(const BasicMatrix<T>& x, std::span<T> out) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j) * x(i, j);
    out[i] = acc;
  }
}

template <typename T>
std::size_t row_perp_project(const BasicMatrix<T>& x, const BasicMatrix<T>& w, BasicMatrix<T>& out) {
  require_same_shape(x, w, "row_perp_project");
  std::size_t passthrough = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T xw = 0, ww = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      xw += x(i, j) * w(i, j);
      ww += w(i, j) * w(i, j);
    }
    if (!(ww > 0)) {
      ++passthrough;
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
      continue;
    }
    T xx = 0, ow = 0, oo = 0;
    const T c = xw / ww;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = x(i, j) - c * w(i, j);
      xx += x(i, j) * x(i, j);
    }
    // Second pass against cancellation.
    for (std::size_t j = 0; j < x.cols(); ++j) ow += out(i, j) * w(i, j);
    const T c2 = ow / ww;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) -= c2 * w(i, j);
      oo += out(i, j) * out(i, j);
    }
    const T tol = flush_tolerance<T>(x.cols());
    if (oo <= tol * tol * xx) {
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = T{0};
    }
  }
  return passthrough;
}

template <typename T>
void row_normalize(const BasicMatrix<T>& x, T eps, BasicMatrix<T>& out) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T ss = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) ss += x(i, j) * x(i, j);
    const T norm = std::sqrt(ss);
    if (norm > eps && static_cast<double>(norm) > kTinyRowNorm) {
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) / norm;
    } else {
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = T{0};
    }
  }
}

template <typename T>
T norm_fro(const BasicMatrix<T>& x) {
  T total = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j) * x(i, j);
    total += acc;
  }
  return std::sqrt(total);
}

template <typename T>
T norm_12(const BasicMatrix<T>& x) {
  T total = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j) * x(i, j);
    total += std::sqrt(acc);
  }
  return total;
}

template <typename T>
T norm_inf2(const BasicMatrix<T>& x) {
  T best = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    T acc = 0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j) * x(i, j);
    best = std::max(best, std::sqrt(acc));
  }
  return best;
}

template <typename T>
void matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b, BasicMatrix<T>& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols()) {
    throw std::invalid_argument("matmul: nonconforming shapes " + shape_str(a.rows(), a.cols()) +
                                " * " + shape_str(b.rows(), b.cols()));
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = 0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
}

template <typename T>
void transpose(const BasicMatrix<T>& a, BasicMatrix<T>& out) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
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

}  // namespace nora::kernels::serial
