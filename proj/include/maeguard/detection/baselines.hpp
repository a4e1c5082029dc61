#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maeguard/models/classifier.hpp"
#include "maeguard/models/data.hpp"

namespace maeguard::detection {

// Image transforms on (H,W,C) images; borders replicate edge pixels.
std::vector<double> median_filter3(std::span<const double> image, std::size_t height,
                                   std::size_t width, std::size_t channels);
std::vector<double> quantize_bits(std::span<const double> image, int bits);

double l1_distance(std::span<const double> a, std::span<const double> b);
std::vector<std::vector<double>> softmax_outputs(const models::ClassifierModel& model,
                                                 const models::ImageSet& images,
                                                 std::size_t batch_size = 64);

// Feature squeezing: max over {3x3 median, 4-bit depth} of the l1 distance
// between softmax outputs of x and the squeezed x.
std::vector<double> baseline_fs(const models::ImageSet& images, const models::ClassifierModel& model,
                                int bits = 4);

// Noise detector: mean over trials of the l1 softmax distance between x and
// x + N(0, r^2) (not clipped). Trial t of image i uses stream (seed, id_i, t).
std::vector<double> baseline_nd(const models::ImageSet& images, const models::ClassifierModel& model,
                                double r, std::size_t trials, std::uint64_t seed,
                                std::span<const std::size_t> image_ids = {});

enum class TargetRule { kRunnerUp, kLeastLikely, kFixed };

struct TdConfig {
  TargetRule rule = TargetRule::kRunnerUp;
  int fixed_target = 0;
  double epsilon = 0.1;
  double alpha = 0.01;
  std::size_t max_steps = 20;

  bool operator==(const TdConfig&) const = default;
};

// Steps K of targeted l-inf PGD until the prediction equals the target
// (K = 0 when it already does, K = max_steps when never reached).
std::vector<std::size_t> td_steps(const models::ImageSet& images, const models::ClassifierModel& model,
                                  const TdConfig& cfg);
// Score -K: fewer steps means more adversarial.
std::vector<double> baseline_td(const models::ImageSet& images, const models::ClassifierModel& model,
                                const TdConfig& cfg);

}  // namespace maeguard::detection
