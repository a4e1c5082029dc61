#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "maeguard/models/classifier.hpp"
#include "maeguard/models/data.hpp"
#include "maeguard/models/mae.hpp"
#include "maeguard/models/optimizer.hpp"

namespace maeguard::models {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  SgdConfig sgd;
  std::uint64_t seed = 7;

  bool operator==(const TrainConfig&) const = default;
};

struct TrainLog {
  struct Row {
    std::size_t step;
    std::size_t epoch;
    double loss;
    double lr;
  };
  std::vector<Row> rows;

  void write_csv(const std::filesystem::path& path) const;
  // Trailing moving average of the loss with the given window.
  std::vector<double> moving_average(std::size_t window) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Called after every optimizer step; handy for progress output.
using StepCallback = std::function<void(const TrainLog::Row&)>;

TrainLog train_classifier(ClassifierModel& model, const ImageSet& data, const TrainConfig& cfg,
                          const StepCallback& on_step = {});
// Each image gets a fresh mask at every step.
TrainLog train_mae(MaeModel& model, const ImageSet& data, const TrainConfig& cfg,
                   const StepCallback& on_step = {});

}  // namespace maeguard::models
