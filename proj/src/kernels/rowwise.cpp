#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>

#include "maeguard/kernels/kernels.hpp"

namespace maeguard::kernels {
namespace {

constexpr std::size_t kParallelElems = 1 << 14;

}  // namespace

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y) {
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelElems)
  for (long r = 0; r < n; ++r) {
    const double* xr = x.data() + static_cast<std::size_t>(r) * cols;
    double* yr = y.data() + static_cast<std::size_t>(r) * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      sum += yr[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
  }
}

void softmax_rows_backward(std::size_t rows, std::size_t cols,
                           std::span<const double> y, std::span<const double> gy,
                           std::span<double> gx) {
  const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelElems)
  for (long r = 0; r < n; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += y[off + j] * gy[off + j];
    for (std::size_t j = 0; j < cols; ++j) gx[off + j] += y[off + j] * (gy[off + j] - dot);
  }
}

void layer_norm_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                     std::span<const double> gamma, std::span<const double> beta,
                     double eps, std::span<double> y, std::span<double> mean,
                     std::span<double> rstd) {
  const auto n = static_cast<long>(rows);
  const double inv_cols = 1.0 / static_cast<double>(cols);
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelElems)
  for (long r = 0; r < n; ++r) {
    const std::size_t row = static_cast<std::size_t>(r);
    const double* xr = x.data() + row * cols;
    double* yr = y.data() + row * cols;
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
    mu *= inv_cols;
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = xr[j] - mu;
      var += d * d;
    }
    var *= inv_cols;
    const double rs = 1.0 / std::sqrt(var + eps);
    mean[row] = mu;
    rstd[row] = rs;
    for (std::size_t j = 0; j < cols; ++j) yr[j] = (xr[j] - mu) * rs * gamma[j] + beta[j];
  }
}

void layer_norm_rows_backward(std::size_t rows, std::size_t cols,
                              std::span<const double> x, std::span<const double> gamma,
                              std::span<const double> mean, std::span<const double> rstd,
                              std::span<const double> gy, std::span<double> gx,
                              std::span<double> ggamma, std::span<double> gbeta) {
  const bool parallel = rows * cols >= kParallelElems;
  const double inv_cols = 1.0 / static_cast<double>(cols);
  if (!gx.empty()) {
    const auto n = static_cast<long>(rows);
#pragma omp parallel for schedule(static) if (parallel)
    for (long r = 0; r < n; ++r) {
      const std::size_t row = static_cast<std::size_t>(r);
      const std::size_t off = row * cols;
      const double mu = mean[row];
      const double rs = rstd[row];
      double sum_g = 0.0;
      double sum_gx = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double g = gy[off + j] * gamma[j];
        sum_g += g;
        sum_gx += g * (x[off + j] - mu) * rs;
      }
      for (std::size_t j = 0; j < cols; ++j) {
        const double xhat = (x[off + j] - mu) * rs;
        const double g = gy[off + j] * gamma[j];
        gx[off + j] += rs * (g - inv_cols * sum_g - xhat * inv_cols * sum_gx);
      }
    }
  }
  if (!ggamma.empty() || !gbeta.empty()) {
    // Column-parallel so that each reduction over rows runs in a fixed order.
    const auto nc = static_cast<long>(cols);
#pragma omp parallel for schedule(static) if (parallel)
    for (long jj = 0; jj < nc; ++jj) {
      const std::size_t j = static_cast<std::size_t>(jj);
      double acc_g = 0.0;
      double acc_b = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t idx = r * cols + j;
        acc_g += gy[idx] * (x[idx] - mean[r]) * rstd[r];
        acc_b += gy[idx];
      }
      if (!ggamma.empty()) ggamma[j] += acc_g;
      if (!gbeta.empty()) gbeta[j] += acc_b;
    }
  }
}

void gelu(std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<long>(x.size());
  constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
#pragma omp parallel for schedule(static) if (x.size() >= kParallelElems)
  for (long i = 0; i < n; ++i) {
    const double v = x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(i)] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
}

void gelu_backward(std::span<const double> x, std::span<const double> gy,
                   std::span<double> gx) {
  const auto n = static_cast<long>(x.size());
  constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
#pragma omp parallel for schedule(static) if (x.size() >= kParallelElems)
  for (long i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double v = x[idx];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
    gx[idx] += gy[idx] * (cdf + v * pdf);
  }
}

}  // namespace maeguard::kernels
