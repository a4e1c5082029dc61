#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "maeguard/autodiff/graph.hpp"
#include "maeguard/autodiff/tensor.hpp"

namespace maeguard::models {

using ad::Graph;
using ad::Tensor;

struct PatchGrid {
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t patch = 4;
  std::size_t channels = 1;

  std::size_t rows() const { return height / patch; }
  std::size_t cols() const { return width / patch; }
  std::size_t n_patches() const { return rows() * cols(); }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::size_t image_size() const { return height * width * channels; }

  // Throws std::invalid_argument when the image is not tiled exactly.
  void validate() const;

  bool operator==(const PatchGrid&) const = default;
};

// image (H,W,c) -> (n_patches, P*P*c) and batch (B,H,W,c) -> (B, n_patches, P*P*c).
// Patches are numbered row-major over the grid; inside a patch pixels are
// row-major with channels innermost.
Tensor patchify(Graph& g, const Tensor& images, const PatchGrid& grid);
Tensor unpatchify(Graph& g, const Tensor& patches, const PatchGrid& grid);

// bits[i] == 1 keeps patch i visible.
struct MaskPattern {
  std::vector<std::uint8_t> bits;
  double ratio = 0.0;

  std::size_t n_masked() const;
  std::size_t n_visible() const { return bits.size() - n_masked(); }
  std::vector<std::size_t> visible() const;
  std::vector<std::size_t> masked() const;
};

std::size_t masked_count(std::size_t n_patches, double ratio);

// Exactly masked_count(n, ratio) patches hidden, chosen uniformly without
// replacement. Throws std::invalid_argument unless 0 <= ratio < 1.
MaskPattern sample_mask(const PatchGrid& grid, double ratio, std::mt19937_64& rng);

}  // namespace maeguard::models
