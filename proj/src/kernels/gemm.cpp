#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "maeguard/kernels/kernels.hpp"

namespace maeguard::kernels {
namespace {

// Small problems are not worth a parallel region.
constexpr std::size_t kParallelFlops = 1 << 15;
// C(m,n) (+)= A(m,k) * B(k,n), all row-major and contiguous.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate, bool parallel) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < rows; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    const double* ai = a + static_cast<std::size_t>(i) * k;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C(m,n) (+)= A^T * B with A stored (k,m).
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate, bool parallel) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < rows; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[p * m + static_cast<std::size_t>(i)];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

std::vector<double> transposed(const double* src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

void gemm_block(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n,
                std::size_t k, const double* a, const double* b, double* c,
                bool accumulate, bool parallel) {
  std::vector<double> b_buf;
  if (trans_b == Trans::kYes) {
    b_buf = transposed(b, n, k);
    b = b_buf.data();
  }
  if (trans_a == Trans::kYes) {
    gemm_tn(m, n, k, a, b, c, accumulate, parallel);
  } else {
    gemm_nn(m, n, k, a, b, c, accumulate, parallel);
  }
}

}  // namespace

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  const bool parallel = m * n * k >= kParallelFlops;
  gemm_block(trans_a, trans_b, m, n, k, a.data(), b.data(), c.data(), accumulate,
             parallel);
}

void batched_gemm(Trans trans_a, Trans trans_b, std::size_t batch,
                  std::size_t m, std::size_t n, std::size_t k,
                  std::span<const double> a, std::span<const double> b,
                  std::span<double> c, bool accumulate) {
  const bool parallel = batch * m * n * k >= kParallelFlops;
  const auto count = static_cast<long>(batch);
#pragma omp parallel for schedule(static) if (parallel)
  for (long s = 0; s < count; ++s) {
    const auto idx = static_cast<std::size_t>(s);
    gemm_block(trans_a, trans_b, m, n, k, a.data() + idx * m * k,
               b.data() + idx * k * n, c.data() + idx * m * n, accumulate, false);
  }
}

}  // namespace maeguard::kernels
