#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <random>
#include <vector>

#include "maeguard/kernels/kernels.hpp"

namespace kn = maeguard::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], tol * (1.0 + std::abs(b[i]))) << "index " << i;
  }
}

}  // namespace

TEST(Gemm, AllTransposeCombinationsMatchReference) {
  std::mt19937_64 rng(1);
  for (auto ta : {kn::Trans::kNo, kn::Trans::kYes}) {
    for (auto tb : {kn::Trans::kNo, kn::Trans::kYes}) {
      for (bool acc : {false, true}) {
        const std::size_t m = 37, n = 29, k = 41;
        auto a = random_vec(m * k, rng);
        auto b = random_vec(k * n, rng);
        auto c0 = random_vec(m * n, rng);
        auto fast = c0, slow = c0;
        kn::gemm(ta, tb, m, n, k, a, b, fast, acc);
        kn::reference::gemm(ta, tb, m, n, k, a, b, slow, acc);
        expect_close(fast, slow, 1e-12);
      }
    }
  }
}

TEST(Gemm, BatchedMatchesReference) {
  std::mt19937_64 rng(2);
  const std::size_t batch = 6, m = 17, n = 19, k = 8;
  auto a = random_vec(batch * m * k, rng);
  auto b = random_vec(batch * k * n, rng);
  std::vector<double> fast(batch * m * n), slow(batch * m * n);
  kn::batched_gemm(kn::Trans::kNo, kn::Trans::kYes, batch, m, n, k, a, b, fast, false);
  kn::reference::batched_gemm(kn::Trans::kNo, kn::Trans::kYes, batch, m, n, k, a, b, slow, false);
  expect_close(fast, slow, 1e-12);
}

TEST(Gemm, BitIdenticalAcrossThreadCounts) {
  std::mt19937_64 rng(3);
  const std::size_t m = 256, n = 96, k = 64;
  auto a = random_vec(m * k, rng);
  auto b = random_vec(k * n, rng);
  std::vector<double> one(m * n), many(m * n);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kn::gemm(kn::Trans::kNo, kn::Trans::kNo, m, n, k, a, b, one, false);
  omp_set_num_threads(4);
  kn::gemm(kn::Trans::kNo, kn::Trans::kNo, m, n, k, a, b, many, false);
  omp_set_num_threads(saved);
  EXPECT_EQ(one, many);
}

TEST(Softmax, MatchesReferenceForwardAndBackward) {
  std::mt19937_64 rng(4);
  const std::size_t rows = 13, cols = 11;
  auto x = random_vec(rows * cols, rng, 3.0);
  auto gy = random_vec(rows * cols, rng);
  std::vector<double> y1(rows * cols), y2(rows * cols);
  kn::softmax_rows(rows, cols, x, y1);
  kn::reference::softmax_rows(rows, cols, x, y2);
  expect_close(y1, y2, 1e-14);
  std::vector<double> g1(rows * cols, 0.0), g2(rows * cols, 0.0);
  kn::softmax_rows_backward(rows, cols, y1, gy, g1);
  kn::reference::softmax_rows_backward(rows, cols, y1, gy, g2);
  expect_close(g1, g2, 1e-12);
}

TEST(LayerNorm, MatchesReferenceForwardAndBackward) {
  std::mt19937_64 rng(5);
  const std::size_t rows = 9, cols = 16;
  auto x = random_vec(rows * cols, rng, 2.0);
  auto gamma = random_vec(cols, rng);
  auto beta = random_vec(cols, rng);
  auto gy = random_vec(rows * cols, rng);
  std::vector<double> y1(rows * cols), y2(rows * cols), m1(rows), m2(rows), r1(rows), r2(rows);
  kn::layer_norm_rows(rows, cols, x, gamma, beta, 1e-5, y1, m1, r1);
  kn::reference::layer_norm_rows(rows, cols, x, gamma, beta, 1e-5, y2, m2, r2);
  expect_close(y1, y2, 1e-12);
  std::vector<double> gx1(rows * cols, 0.0), gx2(rows * cols, 0.0);
  std::vector<double> gg1(cols, 0.0), gg2(cols, 0.0), gb1(cols, 0.0), gb2(cols, 0.0);
  kn::layer_norm_rows_backward(rows, cols, x, gamma, m1, r1, gy, gx1, gg1, gb1);
  kn::reference::layer_norm_rows_backward(rows, cols, x, gamma, m2, r2, gy, gx2, gg2, gb2);
  expect_close(gx1, gx2, 1e-10);
  expect_close(gg1, gg2, 1e-12);
  expect_close(gb1, gb2, 1e-12);
}

TEST(Gelu, MatchesReference) {
  std::mt19937_64 rng(6);
  auto x = random_vec(1000, rng, 3.0);
  auto gy = random_vec(1000, rng);
  std::vector<double> y1(1000), y2(1000), g1(1000, 0.0), g2(1000, 0.0);
  kn::gelu(x, y1);
  kn::reference::gelu(x, y2);
  expect_close(y1, y2, 1e-14);
  kn::gelu_backward(x, gy, g1);
  kn::reference::gelu_backward(x, gy, g2);
  expect_close(g1, g2, 1e-13);
}
