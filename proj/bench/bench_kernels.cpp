#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "maeguard/kernels/kernels.hpp"

namespace kn = maeguard::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

template <bool kReference>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (kReference) {
      kn::reference::gemm(kn::Trans::kNo, kn::Trans::kNo, n, n, n, a, b, c, false);
    } else {
      kn::gemm(kn::Trans::kNo, kn::Trans::kNo, n, n, n, a, b, c, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(
      2.0 * static_cast<double>(n * n * n) * static_cast<double>(state.iterations()) / 1e9,
      benchmark::Counter::kIsRate);
}

template <bool kReference>
void BM_GemmTransB(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_vec(n * n, 3), b = random_vec(n * n, 4);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (kReference) {
      kn::reference::gemm(kn::Trans::kNo, kn::Trans::kYes, n, n, n, a, b, c, false);
    } else {
      kn::gemm(kn::Trans::kNo, kn::Trans::kYes, n, n, n, a, b, c, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool kReference>
void BM_Softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 64;
  auto x = random_vec(rows * cols, 5);
  std::vector<double> y(rows * cols);
  for (auto _ : state) {
    if constexpr (kReference) {
      kn::reference::softmax_rows(rows, cols, x, y);
    } else {
      kn::softmax_rows(rows, cols, x, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kReference>
void BM_LayerNormBackward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 64;
  auto x = random_vec(rows * cols, 6), gy = random_vec(rows * cols, 7);
  auto gamma = random_vec(cols, 8), beta = random_vec(cols, 9);
  std::vector<double> y(rows * cols), mean(rows), rstd(rows);
  kn::layer_norm_rows(rows, cols, x, gamma, beta, 1e-5, y, mean, rstd);
  std::vector<double> gx(rows * cols), gg(cols), gb(cols);
  for (auto _ : state) {
    if constexpr (kReference) {
      kn::reference::layer_norm_rows_backward(rows, cols, x, gamma, mean, rstd, gy, gx, gg, gb);
    } else {
      kn::layer_norm_rows_backward(rows, cols, x, gamma, mean, rstd, gy, gx, gg, gb);
    }
    benchmark::DoNotOptimize(gx.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_GemmTransB<false>)->Arg(128);
BENCHMARK(BM_GemmTransB<true>)->Arg(128);
BENCHMARK(BM_Softmax<false>)->Arg(1024);
BENCHMARK(BM_Softmax<true>)->Arg(1024);
BENCHMARK(BM_LayerNormBackward<false>)->Arg(1024);
BENCHMARK(BM_LayerNormBackward<true>)->Arg(1024);

BENCHMARK_MAIN();
