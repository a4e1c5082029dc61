#include "maeguard/models/patch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "maeguard/autodiff/ops.hpp"

namespace maeguard::models {

void PatchGrid::validate() const {
  if (patch == 0 || height == 0 || width == 0 || channels == 0 || height % patch != 0 ||
      width % patch != 0) {
    throw std::invalid_argument("patch grid: image " + std::to_string(height) + "x" +
                                std::to_string(width) + " is not divisible into " +
                                std::to_string(patch) + "-pixel patches");
  }
}

namespace {

bool is_batched(const Tensor& t, const PatchGrid& grid, const char* op) {
  const auto& s = t.shape();
  if (s.size() == 3 && s[0] == grid.height && s[1] == grid.width && s[2] == grid.channels)
    return false;
  if (s.size() == 4 && s[1] == grid.height && s[2] == grid.width && s[3] == grid.channels)
    return true;
  throw ad::ShapeError(std::string(op) + ": image shape " + ad::to_string(s) +
                       " does not match grid " +
                       ad::to_string({grid.height, grid.width, grid.channels}));
}

}  // namespace

Tensor patchify(Graph& g, const Tensor& images, const PatchGrid& grid) {
  grid.validate();
  const bool batched = is_batched(images, grid, "patchify");
  const std::size_t b = batched ? images.dim(0) : 1;
  const std::size_t p = grid.patch, c = grid.channels;
  auto x = ad::reshape(g, images, {b, grid.rows(), p, grid.cols(), p, c});
  x = ad::transpose(g, x, {0, 1, 3, 2, 4, 5});
  if (batched) return ad::reshape(g, x, {b, grid.n_patches(), grid.patch_dim()});
  return ad::reshape(g, x, {grid.n_patches(), grid.patch_dim()});
}

Tensor unpatchify(Graph& g, const Tensor& patches, const PatchGrid& grid) {
  grid.validate();
  const auto& s = patches.shape();
  const bool ok2 = s.size() == 2 && s[0] == grid.n_patches() && s[1] == grid.patch_dim();
  const bool ok3 = s.size() == 3 && s[1] == grid.n_patches() && s[2] == grid.patch_dim();
  if (!ok2 && !ok3) {
    throw ad::ShapeError("unpatchify: patch shape " + ad::to_string(s) + " does not match grid " +
                         ad::to_string({grid.n_patches(), grid.patch_dim()}));
  }
  const std::size_t b = ok3 ? s[0] : 1;
  const std::size_t p = grid.patch, c = grid.channels;
  auto x = ad::reshape(g, patches, {b, grid.rows(), grid.cols(), p, p, c});
  x = ad::transpose(g, x, {0, 1, 3, 2, 4, 5});
  if (ok3) return ad::reshape(g, x, {b, grid.height, grid.width, c});
  return ad::reshape(g, x, {grid.height, grid.width, c});
}

std::size_t MaskPattern::n_masked() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 0));
}

std::vector<std::size_t> MaskPattern::visible() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> MaskPattern::masked() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (!bits[i]) out.push_back(i);
  return out;
}

std::size_t masked_count(std::size_t n_patches, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("mask ratio must lie in [0,1), got " + std::to_string(ratio));
  }
  const auto n = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_patches)));
  // Keep at least one patch visible even when rounding reaches n.
  return std::min(n, n_patches - 1);
}

MaskPattern sample_mask(const PatchGrid& grid, double ratio, std::mt19937_64& rng) {
  const std::size_t n = grid.n_patches();
  const std::size_t hidden = masked_count(n, ratio);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `hidden` slots are a uniform sample.
  for (std::size_t i = 0; i < hidden; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  MaskPattern mask{std::vector<std::uint8_t>(n, 1), ratio};
  for (std::size_t i = 0; i < hidden; ++i) mask.bits[order[i]] = 0;
  return mask;
}

}  // namespace maeguard::models
