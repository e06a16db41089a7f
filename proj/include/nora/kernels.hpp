#pragma once

// Row-wise kernels in two flavours. `serial` is the plain reference kept for
// testing; `parallel` distributes rows over OpenMP threads. Every reduction
// runs sequentially inside a row and rows are combined in index order, so the
// two flavours agree bit for bit.

#include <cstddef>
#include <limits>
#include <span>

#include "nora/matrix.hpp"

namespace nora::kernels {

/// Rows whose norm is at or below this are treated as exactly zero.
inline constexpr double kTinyRowNorm = 1e-300;

/// A projected row with norm at or below flush_tolerance(n) * |x_i| is
/// rounding noise and is flushed to zero; normalizing it would yield a unit
/// row with no relation to the true (zero) projection.
template <typename T>
constexpr T flush_tolerance(std::size_t n) {
  return T{16} * static_cast<T>(n) * std::numeric_limits<T>::epsilon();
}

namespace serial {

template <typename T> void row_dot(const BasicMatrix<T>& x, const BasicMatrix<T>& w, std::span<T> out);
template <typename T> void row_sqnorm(const BasicMatrix<T>& x, std::span<T> out);
/// Returns the number of zero weight rows passed through unprojected.
template <typename T>
std::size_t row_perp_project(const BasicMatrix<T>& x, const BasicMatrix<T>& w, BasicMatrix<T>& out);
template <typename T> void row_normalize(const BasicMatrix<T>& x, T eps, BasicMatrix<T>& out);
template <typename T> T norm_fro(const BasicMatrix<T>& x);
template <typename T> T norm_12(const BasicMatrix<T>& x);
template <typename T> T norm_inf2(const BasicMatrix<T>& x);
template <typename T> void matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b, BasicMatrix<T>& out);
template <typename T> void transpose(const BasicMatrix<T>& a, BasicMatrix<T>& out);

}  // namespace serial

namespace parallel {

template <typename T> void row_dot(const BasicMatrix<T>& x, const BasicMatrix<T>& w, std::span<T> out);
template <typename T> void row_sqnorm(const BasicMatrix<T>& x, std::span<T> out);
template <typename T>
std::size_t row_perp_project(const BasicMatrix<T>& x, const BasicMatrix<T>& w, BasicMatrix<T>& out);
template <typename T> void row_normalize(const BasicMatrix<T>& x, T eps, BasicMatrix<T>& out);
template <typename T> T norm_fro(const BasicMatrix<T>& x);
template <typename T> T norm_12(const BasicMatrix<T>& x);
template <typename T> T norm_inf2(const BasicMatrix<T>& x);
template <typename T> void matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b, BasicMatrix<T>& out);
template <typename T> void transpose(const BasicMatrix<T>& a, BasicMatrix<T>& out);

/// Threads OpenMP will use for the next parallel region (1 without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace parallel

}  // namespace nora::kernels
