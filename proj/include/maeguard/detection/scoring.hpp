#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maeguard/models/data.hpp"
#include "maeguard/models/mae.hpp"

namespace maeguard::detection {

struct LossSample {
  std::size_t image_id = 0;
  double loss = 0.0;  // mean MAE loss over the masks
  std::vector<std::uint64_t> mask_seeds;
};

// Scores every image of `images` with M fixed masks per image derived from
// (seed, image_ids[i]). image_ids defaults to 0..n-1. Throws if M < 1.
std::vector<LossSample> score_losses(const models::ImageSet& images, const models::MaeModel& mae,
                                     std::size_t M, std::uint64_t seed,
                                     std::span<const std::size_t> image_ids = {},
                                     std::size_t batch_size = 64);

std::vector<double> loss_values(std::span<const LossSample> samples);

// Linear-interpolation quantile (type 7) of an unsorted sample; q in [0,1].
double quantile(std::span<const double> values, double q);

// Sorted clean-loss sample from a held-out calibration split.
class ReferenceDistribution {
 public:
  ReferenceDistribution() = default;
  // Throws std::invalid_argument if fewer than `min_size` values are given.
  explicit ReferenceDistribution(std::vector<double> values, std::size_t min_size = 100);

  std::span<const double> values() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }
  double quantile(double q) const;

 private:
  std::vector<double> sorted_;
};

// Threshold at the (1 - fpr)-quantile of the clean scores; returns the share
// of adversarial scores strictly above it. Higher score means more adversarial.
double tpr_at_fpr(std::span<const double> clean_scores, std::span<const double> adv_scores,
                  double fpr_target = 0.2);
double threshold_at_fpr(std::span<const double> clean_scores, double fpr_target);

}  // namespace maeguard::detection
