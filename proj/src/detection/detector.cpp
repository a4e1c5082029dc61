#include "maeguard/detection/detector.hpp"

#include <algorithm>
#include <stdexcept>
#include <random>
#include <string>

#include "maeguard/detection/ks_test.hpp"
#include "maeguard/models/rng.hpp"

namespace maeguard::detection {

DetectionVerdict detect_batch(std::span<const LossSample> batch, const ReferenceDistribution& ref,
                              double p_threshold, std::size_t min_batch) {
  if (batch.size() < min_batch) {
    throw std::invalid_argument("detect_batch: batch of " + std::to_string(batch.size()) +
                                " is below the floor of " + std::to_string(min_batch) +
                                "; use per-sample detection for small batches");
  }
  DetectionVerdict v;
  std::vector<double> losses;
  for (const auto& s : batch) {
    v.batch_ids.push_back(s.image_id);
    losses.push_back(s.loss);
  }
  const auto ks = ks_two_sample(losses, ref.values());
  v.ks_statistic = ks.statistic;
  v.p_value = ks.p_value;
  v.threshold = p_threshold;
  v.is_adversarial = ks.p_value < p_threshold;
  return v;
}

bool detect_single(const LossSample& sample, const ReferenceDistribution& ref, double q) {
  if (q >= 1.0) return false;
  return sample.loss > ref.quantile(q);
}

std::vector<double> bootstrap_p_values(std::span<const double> pool, const ReferenceDistribution& ref,
                                       const BootstrapConfig& cfg) {
  if (pool.empty()) throw std::invalid_argument("bootstrap: empty pool");
  if (cfg.window == 0) throw std::invalid_argument("bootstrap: window must be positive");
  std::vector<double> out(cfg.batches);
  std::vector<double> window(cfg.window);
  for (std::size_t b = 0; b < cfg.batches; ++b) {
    auto rng = models::stream(cfg.seed, 0xb007, b);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (auto& w : window) w = pool[pick(rng)];
    out[b] = ks_two_sample(window, ref.values()).p_value;
  }
  return out;
}

double calibrate_p_threshold(std::span<const double> clean_pool, const ReferenceDistribution& ref,
                             double fpr_target, const BootstrapConfig& cfg) {
  return quantile(bootstrap_p_values(clean_pool, ref, cfg), fpr_target);
}

BatchRates batch_tpr_at_fpr(std::span<const double> clean_pool, std::span<const double> adv_pool,
                            const ReferenceDistribution& ref, double fpr_target,
                            const BootstrapConfig& cfg) {
  auto score = [](std::vector<double> p) {
    for (auto& v : p) v = 1.0 - v;
    return p;
  };
  BootstrapConfig adv_cfg = cfg;
  adv_cfg.seed = cfg.seed ^ 0xad7ULL;
  const auto clean = score(bootstrap_p_values(clean_pool, ref, cfg));
  const auto adv = score(bootstrap_p_values(adv_pool, ref, adv_cfg));
  BatchRates r;
  r.threshold = threshold_at_fpr(clean, fpr_target);
  r.tpr = tpr_at_fpr(clean, adv, fpr_target);
  r.fpr = static_cast<double>(std::count_if(clean.begin(), clean.end(),
                                            [&](double s) { return s > r.threshold; })) /
          static_cast<double>(clean.size());
  return r;
}

}  // namespace maeguard::detection
