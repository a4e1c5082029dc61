#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "maeguard/harness/artifacts.hpp"
#include "maeguard/harness/config.hpp"
#include "maeguard/harness/dataset.hpp"

namespace maeguard::harness {

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// One row per configured attack, keyed by (attack, epsilon).
struct ResultRow {
  std::string attack;  // spec label, e.g. "pgd-linf@0.1"
  std::string kind;
  double epsilon = 0.0;
  std::size_t examples = 0;
  double attack_success = 0.0;
  double tpr_batch = 0.0;  // MAE-loss KS test on bootstrapped windows
  double tpr_mae = 0.0;    // per-sample MAE loss
  double tpr_fs = 0.0;
  double tpr_nd = 0.0;
  double tpr_td = 0.0;
  double acc_before = 0.0;
  double acc_after = 0.0;
  double loss_clean = 0.0;
  double loss_adv = 0.0;
  double loss_repaired = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  double clean_accuracy = 0.0;           // full test split
  double clean_accuracy_subset = 0.0;    // attacked subset, before repair
  double clean_accuracy_repaired = 0.0;  // attacked subset, after unconditional repair
  double loss_clean = 0.0;
  double loss_noisy = 0.0;
  double p_threshold = 0.0;
  std::vector<ResultRow> rows;

  bool operator==(const ResultTable&) const = default;
};

// results.csv columns, in order.
const std::vector<std::string>& result_columns();
std::string results_csv(const ResultTable& t);
// clean.csv: metric,value rows for the clean-data fields.
std::string clean_csv(const ResultTable& t);
ResultTable parse_results(const std::string& results, const std::string& clean);

using Logger = std::function<void(const std::string&)>;

// Stages read their inputs from the run directory and write their outputs
// there; a stage whose inputs are missing fails and names the stage to rerun.
class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, RunDir run, Logger log = {});

  void train_classifier();
  void train_mae();
  void attack();
  void detect();
  void repair();
  void sweep_iters();
  void sweep_eps();
  void daa_curve();
  ResultTable report();

  // All stages in order, then checksums.
  ResultTable run_all();

  const RunDir& run() const { return run_; }
  const ExperimentConfig& config() const { return cfg_; }

 private:
  struct State;
  ExperimentConfig cfg_;
  RunDir run_;
  Logger log_;
  std::shared_ptr<State> state_;

  const Splits& data();
  void require(const std::string& stage, const std::vector<std::string>& rels) const;
  void stage(const std::string& name, const std::function<void()>& body);
};

// Creates a run directory under cfg.output_dir, echoes the config and runs everything.
ResultTable run_pipeline(const ExperimentConfig& cfg, Logger log = {}, RunDir* created = nullptr);

// Regenerates report artifacts of an existing run. Throws StageError listing
// the stages to rerun when inputs are missing.
ResultTable report(const std::filesystem::path& run_dir, Logger log = {});

}  // namespace maeguard::harness
