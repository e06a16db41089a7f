#pragma once

// Fast dense products behind GemmBackend::blas. OpenBLAS is used when a
// one-time probe confirms it reproduces the reference loops on this host;
// otherwise Eigen takes over for that precision.

#include <string_view>

#include "nora/matrix.hpp"

namespace nora::detail {

template <typename T> bool blas_verified();

/// out = a * b
template <typename T> void fast_gemm(const BasicMatrix<T>& a, const BasicMatrix<T>& b, BasicMatrix<T>& out);

/// One Newton-Schulz step on a wide x: next = 1.5 x - 0.5 (x x^T) x. `gram`
/// is rows x rows scratch.
template <typename T>
void fast_ns_step(const BasicMatrix<T>& x, BasicMatrix<T>& gram, BasicMatrix<T>& next);

}  // namespace nora::detail
