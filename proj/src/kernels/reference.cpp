// Naive serial kernels. Slow on purpose: one loop nest per definition.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

#include "maeguard/kernels/kernels.hpp"

namespace maeguard::kernels::reference {

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n,
          std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a == Trans::kYes ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b == Trans::kYes ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

void batched_gemm(Trans trans_a, Trans trans_b, std::size_t batch,
                  std::size_t m, std::size_t n, std::size_t k,
                  std::span<const double> a, std::span<const double> b,
                  std::span<double> c, bool accumulate) {
  for (std::size_t s = 0; s < batch; ++s) {
    reference::gemm(trans_a, trans_b, m, n, k, a.subspan(s * m * k, m * k),
         b.subspan(s * k * n, k * n), c.subspan(s * m * n, m * n), accumulate);
  }
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = x[r * cols];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[r * cols + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(x[r * cols + j] - mx);
    for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] = std::exp(x[r * cols + j] - mx) / sum;
  }
}

void softmax_rows_backward(std::size_t rows, std::size_t cols,
                           std::span<const double> y, std::span<const double> gy,
                           std::span<double> gx) {
  // Full Jacobian: dy_j/dx_i = y_j (delta_ij - y_i).
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * cols;
    for (std::size_t i = 0; i < cols; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double jac = y[off + j] * ((i == j ? 1.0 : 0.0) - y[off + i]);
        acc += jac * gy[off + j];
      }
      gx[off + i] += acc;
    }
  }
}

void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta,
                     double eps, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) sum += x[r * cols + j];
    const double mu = sum / static_cast<double>(cols);
    double ss = 0.0;
    for (std::size_t j = 0; j < cols; ++j) ss += (x[r * cols + j] - mu) * (x[r * cols + j] - mu);
    const double var = ss / static_cast<double>(cols);
    mean[r] = mu;
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j)
      y[r * cols + j] = gamma[j] * (x[r * cols + j] - mu) / std::sqrt(var + eps) + beta[j];
  }
}

void layer_norm_rows_backward(std::size_t rows, std::size_t cols,
                              std::span<const double> x, std::span<const double> gamma,
                              std::span<const double> mean, std::span<const double> rstd,
                              std::span<const double> gy, std::span<double> gx,
                              std::span<double> ggamma, std::span<double> gbeta) {
  // Explicit Jacobian of xhat w.r.t. x:
  //   dxhat_j/dx_i = rstd * (delta_ij - 1/n - xhat_i xhat_j / n)
  const double inv_n = 1.0 / static_cast<double>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t off = r * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      const double xhat = (x[off + j] - mean[r]) * rstd[r];
      if (!ggamma.empty()) ggamma[j] += gy[off + j] * xhat;
      if (!gbeta.empty()) gbeta[j] += gy[off + j];
    }
    if (gx.empty()) continue;
    for (std::size_t i = 0; i < cols; ++i) {
      const double xi = (x[off + i] - mean[r]) * rstd[r];
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double xj = (x[off + j] - mean[r]) * rstd[r];
        const double jac = rstd[r] * ((i == j ? 1.0 : 0.0) - inv_n - xi * xj * inv_n);
        acc += jac * gamma[j] * gy[off + j];
      }
      gx[off + i] += acc;
    }
  }
}

void gelu(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double phi = 0.5 * std::erfc(-x[i] / std::numbers::sqrt2);
    y[i] = x[i] * phi;
  }
}

void gelu_backward(std::span<const double> x, std::span<const double> gy,
                   std::span<double> gx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double phi = 0.5 * std::erfc(-x[i] / std::numbers::sqrt2);
    const double density = std::exp(-0.5 * x[i] * x[i]) / std::sqrt(2.0 * std::numbers::pi);
    gx[i] += gy[i] * (phi + x[i] * density);
  }
}

}  // namespace maeguard::kernels::reference
