#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maeguard/detection/scoring.hpp"

namespace maeguard::detection {

inline constexpr std::size_t kMinBatch = 8;

struct DetectionVerdict {
  std::vector<std::size_t> batch_ids;
  double ks_statistic = 0.0;
  double p_value = 1.0;
  bool is_adversarial = false;  // p_value < threshold
  double threshold = 0.0;
};

// KS test of the batch losses against the reference. Batches smaller than
// min_batch throw std::invalid_argument.
DetectionVerdict detect_batch(std::span<const LossSample> batch, const ReferenceDistribution& ref,
                              double p_threshold, std::size_t min_batch = kMinBatch);

// Flags iff loss > q-quantile of the reference; q >= 1 never flags.
bool detect_single(const LossSample& sample, const ReferenceDistribution& ref, double q);

struct BootstrapConfig {
  std::size_t window = 32;
  std::size_t batches = 200;
  std::uint64_t seed = 0;
};

// p-values of `batches` windows drawn with replacement from `pool`, each tested
// against `ref`. Batch b uses its own random stream.
std::vector<double> bootstrap_p_values(std::span<const double> pool, const ReferenceDistribution& ref,
                                       const BootstrapConfig& cfg);

// Threshold whose flag rate on bootstrapped clean batches is fpr_target.
double calibrate_p_threshold(std::span<const double> clean_pool, const ReferenceDistribution& ref,
                             double fpr_target, const BootstrapConfig& cfg);

// Batch-level TPR at the given FPR: bootstrapped clean and adversarial windows
// are scored by 1 - p and thresholded at the clean (1 - fpr) quantile.
struct BatchRates {
  double tpr = 0.0;
  double fpr = 0.0;
  double threshold = 0.0;  // on 1 - p
};
BatchRates batch_tpr_at_fpr(std::span<const double> clean_pool, std::span<const double> adv_pool,
                            const ReferenceDistribution& ref, double fpr_target,
                            const BootstrapConfig& cfg);

}  // namespace maeguard::detection
