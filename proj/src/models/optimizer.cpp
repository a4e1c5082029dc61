#include "maeguard/models/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace maeguard::models {

MomentumSgd::MomentumSgd(ParamList params, SgdConfig cfg, std::size_t total_steps)
    : params_(std::move(params)), cfg_(cfg), total_(total_steps) {
  if (cfg_.method != "sgd" && cfg_.method != "adam")
    throw std::invalid_argument("optimizer method must be sgd or adam, got '" + cfg_.method + "'");
  for (const auto& p : params_) velocity_.emplace_back(p.tensor.numel(), 0.0);
  if (cfg_.method == "adam")
    for (const auto& p : params_) second_.emplace_back(p.tensor.numel(), 0.0);
}

double MomentumSgd::learning_rate(std::size_t step) const {
  if (step < cfg_.warmup_steps) {
    return cfg_.lr * static_cast<double>(step + 1) / static_cast<double>(cfg_.warmup_steps);
  }
  const std::size_t span = total_ > cfg_.warmup_steps ? total_ - cfg_.warmup_steps : 1;
  const double progress =
      std::min(1.0, static_cast<double>(step - cfg_.warmup_steps) / static_cast<double>(span));
  return cfg_.lr_min +
         0.5 * (cfg_.lr - cfg_.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

double MomentumSgd::step() {
  const double lr = learning_rate(t_++);
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_)
      for (double g : p.tensor.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
  }
  const bool adam = cfg_.method == "adam";
  const double b1 = cfg_.momentum, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& t = params_[i].tensor;
    if (!t.has_grad()) continue;
    auto w = t.mutable_values();
    auto g = t.grad();
    auto& v = velocity_[i];
    if (adam) {
      auto& s = second_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double grad = scale * g[k];
        v[k] = b1 * v[k] + (1.0 - b1) * grad;
        s[k] = b2 * s[k] + (1.0 - b2) * grad * grad;
        w[k] -= lr * ((v[k] / c1) / (std::sqrt(s[k] / c2) + cfg_.adam_eps) + cfg_.weight_decay * w[k]);
      }
      t.zero_grad();
      continue;
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double grad = scale * g[k] + cfg_.weight_decay * w[k];
      v[k] = cfg_.momentum * v[k] + grad;
      w[k] -= lr * v[k];
    }
    t.zero_grad();
  }
  return lr;
}

}  // namespace maeguard::models
