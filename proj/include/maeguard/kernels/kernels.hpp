#pragma once

// Dense double-precision kernels used by the autodiff engine.
//
// Every kernel in this header has an OpenMP-parallel implementation and a
// naive serial twin in `kernels::reference` with the same signature. The
// reference versions are plain textbook loops kept for testing; they agree
// with the fast path up to rounding. The parallel versions only split work
// over independent output rows (or columns), never over a reduction, so
// their results are bit-identical for any thread count.

#include <cstddef>
#include <span>

namespace maeguard::kernels {

enum class Trans { kNo, kYes };

// C(m,n) = op(A) * op(B), or C += op(A) * op(B) when `accumulate` is set.
// op(A) is (m,k): A is stored (m,k) row-major, or (k,m) when transposed.
// op(B) is (k,n): B is stored (k,n) row-major, or (n,k) when transposed.
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);

// `batch` independent gemms over contiguous (m,k)/(k,n)/(m,n) blocks.
void batched_gemm(Trans trans_a, Trans trans_b, std::size_t batch,
                  std::size_t m, std::size_t n, std::size_t k,
                  std::span<const double> a, std::span<const double> b,
                  std::span<double> c, bool accumulate);

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y);
// gx += J_softmax(y)^T gy, row by row.
void softmax_rows_backward(std::size_t rows, std::size_t cols,
                           std::span<const double> y, std::span<const double> gy,
                           std::span<double> gx);

// y = (x - mean) * rstd * gamma + beta per row; mean/rstd are written per row.
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta,
                     double eps, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd);
// Accumulates into gx, ggamma, gbeta. Any of the three may be empty to skip it.
void layer_norm_rows_backward(std::size_t rows, std::size_t cols,
                              std::span<const double> x, std::span<const double> gamma,
                              std::span<const double> mean, std::span<const double> rstd,
                              std::span<const double> gy, std::span<double> gx,
                              std::span<double> ggamma, std::span<double> gbeta);

// Exact (erf) GELU.
void gelu(std::span<const double> x, std::span<double> y);
void gelu_backward(std::span<const double> x, std::span<const double> gy,
                   std::span<double> gx);

namespace reference {

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate);
void batched_gemm(Trans trans_a, Trans trans_b, std::size_t batch,
                  std::size_t m, std::size_t n, std::size_t k,
                  std::span<const double> a, std::span<const double> b,
                  std::span<double> c, bool accumulate);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y);
void softmax_rows_backward(std::size_t rows, std::size_t cols,
                           std::span<const double> y, std::span<const double> gy,
                           std::span<double> gx);
void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta,
                     double eps, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd);
void layer_norm_rows_backward(std::size_t rows, std::size_t cols,
                              std::span<const double> x, std::span<const double> gamma,
                              std::span<const double> mean, std::span<const double> rstd,
                              std::span<const double> gy, std::span<double> gx,
                              std::span<double> ggamma, std::span<double> gbeta);
void gelu(std::span<const double> x, std::span<double> y);
void gelu_backward(std::span<const double> x, std::span<const double> gy,
                   std::span<double> gx);

}  // namespace reference

}  // namespace maeguard::kernels
