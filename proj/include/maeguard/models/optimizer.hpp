#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "maeguard/models/transformer.hpp"

namespace maeguard::models {

struct SgdConfig {
  std::string method = "sgd";  // sgd | adam (decoupled weight decay, momentum is beta1)
  double lr = 0.05;
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::size_t warmup_steps = 0;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  bool operator==(const SgdConfig&) const = default;
};

// Momentum SGD or Adam with linear warmup followed by cosine decay to lr_min.
class MomentumSgd {
 public:
  MomentumSgd(ParamList params, SgdConfig cfg, std::size_t total_steps);

  double learning_rate(std::size_t step) const;
  // Applies the accumulated gradients, clears them and returns the lr used.
  double step();
  std::size_t steps_taken() const { return t_; }

 private:
  ParamList params_;
  SgdConfig cfg_;
  std::size_t total_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> velocity_;
  std::vector<std::vector<double>> second_;
};

}  // namespace maeguard::models
