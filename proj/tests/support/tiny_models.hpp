#pragma once

#include <random>

#include "maeguard/models/classifier.hpp"
#include "maeguard/models/data.hpp"
#include "maeguard/models/mae.hpp"

namespace maeguard::testing {

inline models::MaeConfig tiny_mae_config() {
  models::MaeConfig c;
  c.grid = {8, 8, 4, 1};
  c.enc_dim = 8;
  c.enc_depth = 1;
  c.enc_heads = 2;
  c.enc_hidden = 16;
  c.dec_dim = 8;
  c.dec_depth = 1;
  c.dec_heads = 2;
  c.dec_hidden = 16;
  c.mask_ratio = 0.5;
  return c;
}

inline models::ClassifierConfig tiny_classifier_config() {
  models::ClassifierConfig c;
  c.grid = {8, 8, 4, 1};
  c.embed_dim = 8;
  c.depth = 1;
  c.heads = 2;
  c.mlp_hidden = 16;
  c.classes = 3;
  return c;
}

inline models::ImageSet random_image_set(std::size_t n, std::uint64_t seed, std::size_t side = 8,
                                         int classes = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  models::ImageSet s{side, side, 1, {}, {}};
  std::vector<double> img(side * side);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : img) v = u(rng);
    s.append(img, static_cast<int>(i % static_cast<std::size_t>(classes)));
  }
  return s;
}

}  // namespace maeguard::testing
