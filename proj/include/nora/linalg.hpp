#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "nora/matrix.hpp"

namespace nora {

/// Row-wise perpendicular projection: row i of the result is
/// x_i - (<x_i, w_i> / |w_i|^2) w_i. Rows where w_i = 0 pass x_i through
/// unchanged; their count is written to `passthrough_rows` when non-null.
/// The projection is applied twice, and a residual at rounding level
/// (see kernels::flush_tolerance) becomes an exact zero row.
template <typename T>
BasicMatrix<T> row_perp_project(const BasicMatrix<T>& x, const BasicMatrix<T>& w,
                                std::size_t* passthrough_rows = nullptr);

/// Row normalization with the 0/0 = 0 convention. Rows with norm <= eps (or
/// <= 1e-300 when eps is 0) become zero rows.
template <typename T>
BasicMatrix<T> row_normalize(const BasicMatrix<T>& x, T eps = T{0});

/// x_i / max(|x_i|, eps), i.e. torch.nn.functional.normalize semantics.
Matrix row_normalize_clamped(const Matrix& x, double eps);

template <typename T> T norm_fro(const BasicMatrix<T>& x);
/// Sum of row Euclidean norms.
template <typename T> T norm_12(const BasicMatrix<T>& x);
/// Largest row Euclidean norm.
template <typename T> T norm_inf2(const BasicMatrix<T>& x);

std::vector<double> row_dot(const Matrix& x, const Matrix& w);
std::vector<double> row_norms(const Matrix& x);
/// Frobenius inner product <a, b>.
double inner(const Matrix& a, const Matrix& b);

enum class GemmBackend {
  reference,  // deterministic row-major loops
  blas,       // OpenBLAS (gemm, or syrk/symm inside Newton-Schulz); Eigen if OpenBLAS fails its probe
};

template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b,
                      GemmBackend backend = GemmBackend::reference);
template <typename T> BasicMatrix<T> transpose(const BasicMatrix<T>& a);

/// y + alpha * x
Matrix axpy(double alpha, const Matrix& x, const Matrix& y);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& x, double alpha);

/// Runs X <- 1/2 X (3I - X^T X) for `iters` steps from X0 = x. The input is
/// expected to be pre-scaled (see orthogonalize). Tall inputs are transposed,
/// iterated on the short side, and transposed back.
template <typename T>
BasicMatrix<T> newton_schulz(const BasicMatrix<T>& x, int iters,
                             GemmBackend backend = GemmBackend::reference);

/// Newton-Schulz from X0 = x / |x|_F. A zero input yields a zero matrix.
template <typename T>
BasicMatrix<T> orthogonalize(const BasicMatrix<T>& x, int iters,
                             GemmBackend backend = GemmBackend::reference);

/// Pins the BLAS thread pool (the benchmark measures single-threaded by default).
void set_blas_threads(int n);

/// "openblas" when OpenBLAS passed its correctness probe for T on this host,
/// otherwise "eigen".
template <typename T> std::string_view gemm_provider();

}  // namespace nora
