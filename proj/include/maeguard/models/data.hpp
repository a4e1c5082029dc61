#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "maeguard/autodiff/tensor.hpp"

namespace maeguard::models {

// Images in [0,1], stored (N, H, W, C) row-major, with one label per image
// (labels may be empty for unlabeled sets).
struct ImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;
  std::vector<int> labels;

  std::size_t image_size() const { return height * width * channels; }
  std::size_t size() const { return image_size() == 0 ? 0 : pixels.size() / image_size(); }
  bool empty() const { return size() == 0; }

  std::span<const double> image(std::size_t i) const;
  std::span<double> image(std::size_t i);

  // (count, H, W, C) tensor of images [first, first + count).
  ad::Tensor batch(std::size_t first, std::size_t count) const;
  ad::Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;

  ImageSet subset(std::span<const std::size_t> indices) const;
  void append(std::span<const double> image, int label);
};

}  // namespace maeguard::models
