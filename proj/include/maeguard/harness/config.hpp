#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "maeguard/attacks/attacks.hpp"
#include "maeguard/detection/baselines.hpp"
#include "maeguard/detection/detector.hpp"
#include "maeguard/models/classifier.hpp"
#include "maeguard/models/mae.hpp"
#include "maeguard/models/training.hpp"
#include "maeguard/repair/repair.hpp"

namespace maeguard::attacks {
void to_json(nlohmann::json& j, const AttackSpec& s);
void from_json(const nlohmann::json& j, AttackSpec& s);
}  // namespace maeguard::attacks

namespace maeguard::repair {
void to_json(nlohmann::json& j, const RepairConfig& c);
void from_json(const nlohmann::json& j, RepairConfig& c);
}  // namespace maeguard::repair

namespace maeguard::detection {
void to_json(nlohmann::json& j, const TdConfig& c);
void from_json(const nlohmann::json& j, TdConfig& c);
}  // namespace maeguard::detection

namespace maeguard::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string format = "synthetic";  // synthetic | idx | manifest
  std::string images;                // idx image file or manifest file
  std::string labels;                // idx label file
  std::size_t synthetic_count = 6000;
  std::size_t train = 4000;
  std::size_t calibration = 1000;
  std::size_t test = 1000;
  std::uint64_t seed = 17;

  bool operator==(const DataConfig&) const = default;
};

struct DetectionConfig {
  std::size_t masks = 4;
  std::size_t window = 32;
  double p_threshold = 0.05;  // replaced by the bootstrap calibration when calibrate is set
  bool calibrate = true;
  double fpr_target = 0.2;
  std::size_t bootstrap_batches = 200;
  std::size_t reference_size = 1000;
  std::uint64_t seed = 23;
  int fs_bits = 4;
  double nd_radius = 0.1;
  std::size_t nd_trials = 8;
  detection::TdConfig td;

  bool operator==(const DetectionConfig&) const = default;
};

struct SweepConfig {
  std::vector<std::size_t> iters{0, 1, 5, 10, 20};
  std::vector<double> epsilons{2.0 / 255, 4.0 / 255, 8.0 / 255, 16.0 / 255};
  std::vector<double> daa_lambdas{0, 1, 2, 4, 6};
  std::size_t daa_examples = 128;
  attacks::AttackSpec daa{attacks::AttackKind::kDaa};

  bool operator==(const SweepConfig&) const = default;
};

struct ExperimentConfig {
  DataConfig data;
  models::ClassifierConfig classifier;
  models::TrainConfig classifier_train;
  models::MaeConfig mae;
  models::TrainConfig mae_train;
  std::vector<attacks::AttackSpec> attacks;
  std::size_t attack_examples = 256;  // test images attacked per spec
  std::size_t attack_batch = 32;
  DetectionConfig detection;
  repair::RepairConfig repair;
  bool gated_repair = false;
  SweepConfig sweeps;
  std::uint64_t seed = 0;
  std::string output_dir = "runs";

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig default_config();

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Unknown keys are rejected; missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

// JSON with // and /* */ comments allowed.
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& c);
// Range checks plus existence of referenced data paths. Throws ConfigError.
void validate(const ExperimentConfig& c);

}  // namespace maeguard::harness
