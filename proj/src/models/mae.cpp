#include "maeguard/models/mae.hpp"

#include <stdexcept>
#include <string>

#include "maeguard/models/classifier.hpp"
#include "maeguard/models/rng.hpp"

namespace maeguard::models {

MaeModel::MaeModel(const MaeConfig& cfg) : cfg_(cfg) {
  cfg_.grid.validate();
  masked_count(cfg_.grid.n_patches(), cfg_.mask_ratio);
  std::mt19937_64 rng(cfg_.seed);
  const auto& grid = cfg_.grid;
  embed_ = Linear::create(grid.patch_dim(), cfg_.enc_dim, rng);
  enc_pos_ = sincos_positions(grid.rows(), grid.cols(), cfg_.enc_dim);
  for (std::size_t i = 0; i < cfg_.enc_depth; ++i)
    encoder_.push_back(TransformerBlock::create(cfg_.enc_dim, cfg_.enc_heads, cfg_.enc_hidden, rng));
  enc_norm_ = LayerNorm::create(cfg_.enc_dim);
  dec_embed_ = Linear::create(cfg_.enc_dim, cfg_.dec_dim, rng);
  mask_token_ = random_parameter({1, cfg_.dec_dim}, 0.02, rng);
  dec_pos_ = sincos_positions(grid.rows(), grid.cols(), cfg_.dec_dim);
  for (std::size_t i = 0; i < cfg_.dec_depth; ++i)
    decoder_.push_back(TransformerBlock::create(cfg_.dec_dim, cfg_.dec_heads, cfg_.dec_hidden, rng));
  dec_norm_ = LayerNorm::create(cfg_.dec_dim);
  head_ = Linear::create(cfg_.dec_dim, grid.patch_dim(), rng);
}

namespace {

std::size_t common_visible(std::span<const MaskPattern> masks, std::size_t n_patches,
                           std::size_t batch) {
  if (masks.size() != batch) {
    throw std::invalid_argument("mae: " + std::to_string(masks.size()) + " masks for " +
                                std::to_string(batch) + " images");
  }
  const std::size_t v = masks.empty() ? 0 : masks[0].n_visible();
  for (const auto& m : masks) {
    if (m.bits.size() != n_patches) {
      throw std::invalid_argument("mae: mask covers " + std::to_string(m.bits.size()) +
                                  " patches, grid has " + std::to_string(n_patches));
    }
    if (m.n_visible() != v) throw std::invalid_argument("mae: masks in a batch differ in visible count");
  }
  if (v == 0) throw std::invalid_argument("mae: mask leaves no visible patch");
  return v;
}

}  // namespace

Tensor MaeModel::reconstruct(Graph& g, const Tensor& images,
                             std::span<const MaskPattern> masks) const {
  const auto& grid = cfg_.grid;
  const std::size_t b = images.dim(0), n = grid.n_patches();
  const std::size_t v = common_visible(masks, n, b);

  std::vector<std::size_t> vis_rows, vis_pos;
  vis_rows.reserve(b * v);
  for (std::size_t i = 0; i < b; ++i) {
    for (auto p : masks[i].visible()) {
      vis_rows.push_back(i * n + p);
      vis_pos.push_back(p);
    }
  }
  auto patches = ad::reshape(g, patchify(g, images, grid), {b * n, grid.patch_dim()});
  auto x = ad::gather_rows(g, patches, vis_rows);
  x = ad::add(g, embed_(g, x), ad::gather_rows(g, enc_pos_, vis_pos));
  x = ad::reshape(g, x, {b, v, cfg_.enc_dim});
  for (const auto& blk : encoder_) x = blk(g, x);
  x = dec_embed_(g, enc_norm_(g, x));
  x = ad::reshape(g, x, {b * v, cfg_.dec_dim});

  // Row b*v of `pool` is the mask token.
  auto pool = ad::concat_rows(g, {x, mask_token_});
  std::vector<std::size_t> order(b * n), positions(b * n);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t seen = 0;
    for (std::size_t p = 0; p < n; ++p) {
      order[i * n + p] = masks[i].bits[p] ? i * v + seen++ : b * v;
      positions[i * n + p] = p;
    }
  }
  auto y = ad::add(g, ad::gather_rows(g, pool, order), ad::gather_rows(g, dec_pos_, positions));
  y = ad::reshape(g, y, {b, n, cfg_.dec_dim});
  for (const auto& blk : decoder_) y = blk(g, y);
  return head_(g, dec_norm_(g, y));
}

ParamList MaeModel::parameters() const {
  ParamList out;
  embed_.collect("embed", out);
  for (std::size_t i = 0; i < encoder_.size(); ++i)
    encoder_[i].collect("encoder." + std::to_string(i), out);
  enc_norm_.collect("enc_norm", out);
  dec_embed_.collect("dec_embed", out);
  out.push_back({"mask_token", mask_token_});
  for (std::size_t i = 0; i < decoder_.size(); ++i)
    decoder_[i].collect("decoder." + std::to_string(i), out);
  dec_norm_.collect("dec_norm", out);
  head_.collect("head", out);
  return out;
}

Tensor masked_mse(Graph& g, const Tensor& target, const Tensor& prediction,
                  std::span<const MaskPattern> masks, ad::Reduction reduction) {
  if (target.shape() != prediction.shape() || target.rank() != 3) {
    throw ad::ShapeError("masked_mse: shape mismatch " + ad::to_string(target.shape()) + " vs " +
                         ad::to_string(prediction.shape()));
  }
  const std::size_t b = target.dim(0), n = target.dim(1), pd = target.dim(2);
  if (masks.size() != b) throw std::invalid_argument("masked_mse: one mask per image required");
  std::vector<std::size_t> rows;
  std::vector<double> weight;
  for (std::size_t i = 0; i < b; ++i) {
    if (masks[i].bits.size() != n) throw std::invalid_argument("masked_mse: mask size mismatch");
    const auto hidden = masks[i].masked();
    if (hidden.empty()) continue;
    const double w = 1.0 / static_cast<double>(hidden.size() * pd);
    for (auto p : hidden) {
      rows.push_back(i * n + p);
      weight.insert(weight.end(), pd, w);
    }
  }
  if (rows.empty()) return Tensor::scalar(0.0);
  auto t = ad::gather_rows(g, ad::reshape(g, target, {b * n, pd}), rows);
  auto p = ad::gather_rows(g, ad::reshape(g, prediction, {b * n, pd}), rows);
  auto d = ad::sub(g, p, t);
  Tensor w({rows.size(), pd}, std::move(weight));
  auto total = ad::sum(g, ad::mul(g, ad::mul(g, d, d), w));
  if (reduction == ad::Reduction::kMean) total = ad::scale(g, total, 1.0 / static_cast<double>(b));
  return total;
}

Tensor mae_loss(Graph& g, const Tensor& images, std::span<const MaskPattern> masks,
                const MaeModel& model, ad::Reduction reduction) {
  auto target = patchify(g, images, model.config().grid);
  auto pred = model.reconstruct(g, images, masks);
  return masked_mse(g, target, pred, masks, reduction);
}

namespace {

std::vector<double> image_losses(const Tensor& target, const Tensor& pred,
                                 std::span<const MaskPattern> masks) {
  const std::size_t b = target.dim(0), n = target.dim(1), pd = target.dim(2);
  std::vector<double> out(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const auto hidden = masks[i].masked();
    if (hidden.empty()) continue;
    double acc = 0.0;
    for (auto p : hidden) {
      for (std::size_t e = 0; e < pd; ++e) {
        const std::size_t at = (i * n + p) * pd + e;
        const double diff = pred.values()[at] - target.values()[at];
        acc += diff * diff;
      }
    }
    out[i] = acc / static_cast<double>(hidden.size() * pd);
  }
  return out;
}

}  // namespace

std::vector<double> mae_losses(const MaeModel& model, const Tensor& images,
                               std::span<const MaskPattern> masks) {
  Graph g(ad::GradScope::kNone);
  auto target = patchify(g, images, model.config().grid);
  auto pred = model.reconstruct(g, images, masks);
  return image_losses(target, pred, masks);
}

std::uint64_t mask_seed(std::uint64_t seed, std::uint64_t image_id, std::size_t m) {
  return mix64(mix64(mix64(seed ^ 0x3a5cULL) ^ image_id) + m);
}

std::vector<MaskPattern> fixed_masks(const MaeConfig& cfg, std::uint64_t seed,
                                     std::uint64_t image_id, std::size_t M) {
  std::vector<MaskPattern> out;
  out.reserve(M);
  for (std::size_t m = 0; m < M; ++m) {
    std::mt19937_64 rng(mask_seed(seed, image_id, m));
    out.push_back(sample_mask(cfg.grid, cfg.mask_ratio, rng));
  }
  return out;
}

MaskSetLoss mask_set_loss(const MaeModel& model, const Tensor& images,
                          const std::vector<std::vector<MaskPattern>>& masks, bool with_grad) {
  const std::size_t b = images.dim(0);
  if (masks.size() != b) throw std::invalid_argument("mask_set_loss: one mask set per image required");
  const std::size_t M = b == 0 ? 0 : masks[0].size();
  if (M == 0) throw std::invalid_argument("mask_set_loss: at least one mask per image required");
  for (const auto& set : masks)
    if (set.size() != M) throw std::invalid_argument("mask_set_loss: mask sets differ in size");

  MaskSetLoss out;
  out.losses.assign(b, 0.0);
  if (with_grad) out.grad.assign(images.numel(), 0.0);
  const double inv = 1.0 / static_cast<double>(M);
  std::vector<MaskPattern> column(b);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t i = 0; i < b; ++i) column[i] = masks[i][m];
    Tensor x(images.shape(), {images.values().begin(), images.values().end()}, with_grad);
    Graph g(with_grad ? ad::GradScope::kInputsOnly : ad::GradScope::kNone);
    auto target = patchify(g, x, model.config().grid);
    auto pred = model.reconstruct(g, x, column);
    const auto losses = image_losses(target, pred, column);
    for (std::size_t i = 0; i < b; ++i) out.losses[i] += inv * losses[i];
    if (!with_grad) continue;
    auto loss = masked_mse(g, target, pred, column, ad::Reduction::kSum);
    if (!g.tracks(loss)) continue;  // nothing masked: zero gradient
    const auto grad = g.gradient(loss, x);
    for (std::size_t e = 0; e < out.grad.size(); ++e) out.grad[e] += inv * grad.values()[e];
  }
  return out;
}

}  // namespace maeguard::models
