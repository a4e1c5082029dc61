#include "maeguard/detection/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace maeguard::detection {

std::vector<LossSample> score_losses(const models::ImageSet& images, const models::MaeModel& mae,
                                     std::size_t M, std::uint64_t seed,
                                     std::span<const std::size_t> image_ids,
                                     std::size_t batch_size) {
  if (M < 1) throw std::invalid_argument("score_losses: need at least one mask per image (M >= 1)");
  std::vector<std::size_t> ids(image_ids.begin(), image_ids.end());
  if (ids.empty()) {
    ids.resize(images.size());
    std::iota(ids.begin(), ids.end(), 0);
  }
  if (ids.size() != images.size()) throw std::invalid_argument("score_losses: one id per image required");
  std::vector<LossSample> out;
  out.reserve(images.size());
  const std::size_t bs = std::max<std::size_t>(1, batch_size);
  for (std::size_t first = 0; first < images.size(); first += bs) {
    const std::size_t n = std::min(bs, images.size() - first);
    std::vector<std::vector<models::MaskPattern>> masks;
    for (std::size_t i = 0; i < n; ++i)
      masks.push_back(models::fixed_masks(mae.config(), seed, ids[first + i], M));
    const auto result = models::mask_set_loss(mae, images.batch(first, n), masks, false);
    for (std::size_t i = 0; i < n; ++i) {
      LossSample s{ids[first + i], result.losses[i], {}};
      for (std::size_t m = 0; m < M; ++m) s.mask_seeds.push_back(models::mask_seed(seed, s.image_id, m));
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<double> loss_values(std::span<const LossSample> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.loss);
  return out;
}

namespace {

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  q = std::clamp(q, 0.0, 1.0);
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double quantile(std::span<const double> values, double q) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, q);
}

ReferenceDistribution::ReferenceDistribution(std::vector<double> values, std::size_t min_size)
    : sorted_(std::move(values)) {
  if (sorted_.size() < std::max<std::size_t>(1, min_size)) {
    throw std::invalid_argument("reference distribution: " + std::to_string(sorted_.size()) +
                                " clean losses, need at least " + std::to_string(min_size));
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double ReferenceDistribution::quantile(double q) const { return sorted_quantile(sorted_, q); }

double threshold_at_fpr(std::span<const double> clean_scores, double fpr_target) {
  return quantile(clean_scores, 1.0 - fpr_target);
}

double tpr_at_fpr(std::span<const double> clean_scores, std::span<const double> adv_scores,
                  double fpr_target) {
  if (adv_scores.empty()) throw std::invalid_argument("tpr_at_fpr: no adversarial scores");
  const double thr = threshold_at_fpr(clean_scores, fpr_target);
  const auto above = std::count_if(adv_scores.begin(), adv_scores.end(), [&](double s) { return s > thr; });
  return static_cast<double>(above) / static_cast<double>(adv_scores.size());
}

}  // namespace maeguard::detection
