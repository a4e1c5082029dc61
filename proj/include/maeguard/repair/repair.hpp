#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maeguard/attacks/attacks.hpp"
#include "maeguard/models/classifier.hpp"
#include "maeguard/models/mae.hpp"

namespace maeguard::repair {

enum class RepairInit { kZero, kUniform };

std::string to_string(RepairInit init);
RepairInit parse_repair_init(const std::string& name);

struct RepairConfig {
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  std::size_t iters = 5;
  RepairInit init = RepairInit::kUniform;
  std::size_t masks = 4;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;

  // Throws std::invalid_argument unless epsilon > 0, alpha > 0, masks >= 1.
  void validate() const;
  bool operator==(const RepairConfig&) const = default;
};

struct RepairResult {
  std::size_t image_id = 0;
  std::vector<double> input;
  std::vector<double> adapted;
  double loss_before = 0.0;  // at the input
  double loss_after = 0.0;   // at the adapted image
  int prediction_before = -1;
  int prediction_after = -1;
  std::vector<double> trajectory;  // loss at iterates 0..iters
};

// Called with the adapted batch after init (step 0) and after every update.
using RepairIterateFn = std::function<void(std::size_t step, std::span<const std::size_t> image_ids,
                                           std::span<const double> adapted)>;

struct RepairOptions {
  const models::ClassifierModel* classifier = nullptr;  // fills predictions when set
  RepairIterateFn on_iterate;
  // Extra snapshots of the adapted images after these step counts (<= iters).
  std::vector<std::size_t> snapshot_steps;
  std::vector<std::vector<std::vector<double>>>* snapshots = nullptr;  // [step][image]
};

// Signed-gradient descent on the mean MAE loss over M masks fixed per call and
// derived from (cfg.seed, image_id). image_ids defaults to 0..n-1.
std::vector<RepairResult> repair(const models::ImageSet& images, const models::MaeModel& mae,
                                 const RepairConfig& cfg, std::span<const std::size_t> image_ids = {},
                                 const RepairOptions& options = {});
RepairResult repair(std::span<const double> image, const models::PatchGrid& grid,
                    const models::MaeModel& mae, const RepairConfig& cfg, std::size_t image_id = 0);

struct RepairReport {
  std::size_t count = 0;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double mean_loss_before = 0.0;
  double mean_loss_after = 0.0;
  double median_loss_before = 0.0;
  double median_loss_after = 0.0;
  double fraction_loss_decreased = 0.0;
  std::vector<RepairResult> results;
};

// Repairs every adversarial image and re-classifies it. With `gate` set, only
// examples whose gate entry is nonzero are repaired; the rest pass through.
RepairReport repair_and_classify(std::span<const attacks::AdvExample> adv_set,
                                 const models::MaeModel& mae, const models::ClassifierModel& classifier,
                                 const RepairConfig& cfg, std::span<const std::uint8_t> gate = {});

// Clean images wrapped as AdvExamples (adv == clean) for the clean-accuracy check.
std::vector<attacks::AdvExample> as_examples(const models::ImageSet& images,
                                             const models::ClassifierModel& classifier,
                                             std::span<const std::size_t> image_ids = {});

struct SweepPoint {
  double value = 0.0;  // iters or epsilon
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

std::vector<SweepPoint> sweep_iters(std::span<const attacks::AdvExample> adv_set,
                                    const models::MaeModel& mae,
                                    const models::ClassifierModel& classifier, const RepairConfig& base,
                                    const std::vector<std::size_t>& iters_grid = {0, 1, 5, 10, 20});

// Iterations fixed at 5 and alpha = epsilon / 4 at every grid point.
std::vector<SweepPoint> sweep_epsilon(std::span<const attacks::AdvExample> adv_set,
                                      const models::MaeModel& mae,
                                      const models::ClassifierModel& classifier, const RepairConfig& base,
                                      const std::vector<double>& eps_grid = {2.0 / 255, 4.0 / 255,
                                                                             8.0 / 255, 16.0 / 255});

}  // namespace maeguard::repair
