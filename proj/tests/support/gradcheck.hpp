#pragma once

// Central finite-difference oracle for scalar functions of tensors. The
// numerical side only ever evaluates forward values in an inference graph,
// so it shares no code path with the backward implementations under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "maeguard/autodiff/graph.hpp"
#include "maeguard/autodiff/ops.hpp"

namespace maeguard::testing {

using ScalarFn = std::function<ad::Tensor(ad::Graph&, const std::vector<ad::Tensor>&)>;

struct GradCheckResult {
  double max_relative_error = 0.0;  // worst over inputs of ||a - n|| / ||n||
  std::vector<std::vector<double>> analytic;
  std::vector<std::vector<double>> numeric;
};

inline std::vector<double> numeric_gradient(const ScalarFn& fn, std::vector<ad::Tensor> inputs,
                                            std::size_t which, double step) {
  std::vector<double> out(inputs[which].numel());
  auto values = inputs[which].mutable_values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    ad::Graph gp(ad::GradScope::kNone);
    const double fp = fn(gp, inputs).item();
    values[i] = saved - step;
    ad::Graph gm(ad::GradScope::kNone);
    const double fm = fn(gm, inputs).item();
    values[i] = saved;
    out[i] = (fp - fm) / (2.0 * step);
  }
  return out;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0.0, ref = 0.0, ana = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    ref += n[i] * n[i];
    ana += a[i] * a[i];
  }
  const double denom = std::max(std::sqrt(std::max(ref, ana)), 1e-8);
  return std::sqrt(diff) / denom;
}

// Every input that should be checked must have requires_grad set.
inline GradCheckResult grad_check(const ScalarFn& fn, const std::vector<ad::Tensor>& inputs,
                                  double step = 1e-5) {
  GradCheckResult result;
  for (auto t : inputs) t.zero_grad();
  ad::Graph g(ad::GradScope::kAll);
  auto loss = fn(g, inputs);
  g.backward(loss);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    std::vector<double> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
    auto numeric = numeric_gradient(fn, inputs, k, step);
    result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic, numeric));
    result.analytic.push_back(std::move(analytic));
    result.numeric.push_back(std::move(numeric));
  }
  return result;
}

inline ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double scale = 1.0,
                                bool requires_grad = true) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace maeguard::testing
