#pragma once

// Checkpoint container, version 1 (all integers and floats little-endian):
//
//   bytes 0..7   magic "MAEGCKPT"
//   uint32       format version
//   uint64       header length L
//   L bytes      UTF-8 JSON header:
//                  {"kind": "classifier" | "mae",
//                   "config": {...model config...},
//                   "extra": {...free-form...},
//                   "tensors": [{"name", "shape", "offset"}, ...]}
//   payload      float64 values; tensor i starts `offset` doubles into it
//
// Readers reject unknown major versions, truncated payloads and tensors whose
// shape disagrees with the model being restored.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "maeguard/models/classifier.hpp"
#include "maeguard/models/mae.hpp"

namespace maeguard::models {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  ad::Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  nlohmann::json extra = nlohmann::json::object();
  std::map<std::string, StoredTensor> tensors;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(const std::filesystem::path& path, const std::string& kind,
                      const nlohmann::json& config, const ParamList& params,
                      const nlohmann::json& extra = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies stored values into `params`; every parameter must be present.
void restore_parameters(const Checkpoint& ckpt, const ParamList& params);

void save_classifier(const std::filesystem::path& path, const ClassifierModel& model);
ClassifierModel load_classifier(const std::filesystem::path& path);
void save_mae(const std::filesystem::path& path, const MaeModel& model);
MaeModel load_mae(const std::filesystem::path& path);

}  // namespace maeguard::models
