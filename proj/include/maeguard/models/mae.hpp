#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maeguard/autodiff/ops.hpp"
#include "maeguard/models/patch.hpp"
#include "maeguard/models/transformer.hpp"

namespace maeguard::models {

struct MaeConfig {
  PatchGrid grid{28, 28, 4, 1};
  std::size_t enc_dim = 64;
  std::size_t enc_depth = 4;
  std::size_t enc_heads = 4;
  std::size_t enc_hidden = 128;
  std::size_t dec_dim = 32;
  std::size_t dec_depth = 1;
  std::size_t dec_heads = 2;
  std::size_t dec_hidden = 64;
  double mask_ratio = 0.75;
  std::uint64_t seed = 2;

  bool operator==(const MaeConfig&) const = default;
};

// Encoder over visible patches only; the decoder sees visible tokens plus a
// shared learned mask token at every hidden position.
class MaeModel {
 public:
  explicit MaeModel(const MaeConfig& cfg);

  // images (B,H,W,C), one mask per image, all with the same visible count.
  // Returns per-patch pixel predictions (B, n_patches, patch_dim).
  Tensor reconstruct(Graph& g, const Tensor& images, std::span<const MaskPattern> masks) const;

  const MaeConfig& config() const { return cfg_; }
  ParamList parameters() const;

 private:
  MaeConfig cfg_;
  Linear embed_;
  Tensor enc_pos_;
  std::vector<TransformerBlock> encoder_;
  LayerNorm enc_norm_;
  Linear dec_embed_;
  Tensor mask_token_;
  Tensor dec_pos_;
  std::vector<TransformerBlock> decoder_;
  LayerNorm dec_norm_;
  Linear head_;
};

// Per-image mean squared error over masked patches, reduced over the batch
// by mean or sum. Images with no masked patch contribute 0. Both tensors are
// (B, n_patches, patch_dim).
Tensor masked_mse(Graph& g, const Tensor& target, const Tensor& prediction,
                  std::span<const MaskPattern> masks, ad::Reduction reduction);

Tensor mae_loss(Graph& g, const Tensor& images, std::span<const MaskPattern> masks,
                const MaeModel& model, ad::Reduction reduction = ad::Reduction::kMean);

// Inference-only per-image losses.
std::vector<double> mae_losses(const MaeModel& model, const Tensor& images,
                               std::span<const MaskPattern> masks);

// Seed of mask m of image `image_id`; mask m is sample_mask(...) driven by
// std::mt19937_64(mask_seed(seed, image_id, m)).
std::uint64_t mask_seed(std::uint64_t seed, std::uint64_t image_id, std::size_t m);
std::vector<MaskPattern> fixed_masks(const MaeConfig& cfg, std::uint64_t seed,
                                     std::uint64_t image_id, std::size_t M);

struct MaskSetLoss {
  std::vector<double> losses;  // per image, mean over its masks
  std::vector<double> grad;    // d(sum_i losses_i)/d images, empty unless requested
};

// masks[i] holds the mask set of image i; every set must have the same size.
MaskSetLoss mask_set_loss(const MaeModel& model, const Tensor& images,
                          const std::vector<std::vector<MaskPattern>>& masks, bool with_grad);

}  // namespace maeguard::models
