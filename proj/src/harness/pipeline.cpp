#include "maeguard/harness/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "maeguard/detection/baselines.hpp"
#include "maeguard/detection/detector.hpp"
#include "maeguard/detection/scoring.hpp"
#include "maeguard/harness/stats.hpp"
#include "maeguard/harness/svg.hpp"
#include "maeguard/harness/synthetic.hpp"
#include "maeguard/models/checkpoint.hpp"
#include "maeguard/models/rng.hpp"
#include "maeguard/repair/repair.hpp"

namespace maeguard::harness {

namespace fs = std::filesystem;
using attacks::AdvExample;
using attacks::AttackSpec;

namespace {

constexpr std::size_t kCalibrationIdBase = 1'000'000;
constexpr std::size_t kTestIdBase = 2'000'000;
constexpr double kNoiseLevel = 0.05;
constexpr std::size_t kHistogramBins = 40;

std::vector<std::size_t> id_range(std::size_t base, std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), base);
  return ids;
}

std::string safe_name(const std::string& label) {
  std::string s = label;
  for (char& c : s)
    if (c == '@') c = '_';
  return s;
}

std::string adv_path(const AttackSpec& s) { return "adv/" + safe_name(s.label()) + ".adv"; }
std::string scores_path(const AttackSpec& s) { return "scores/" + safe_name(s.label()) + ".csv"; }
std::string baseline_path(const std::string& name) { return "scores/baselines_" + name + ".csv"; }
std::string repaired_path(const std::string& name) { return "repaired/" + name + ".adv"; }
std::string repair_csv_path(const std::string& name) { return "repair/" + name + ".csv"; }

std::string lambda_name(double l) { return "lambda_" + fmt(l); }

models::ImageSet images_of(const std::vector<AdvExample>& set, const models::PatchGrid& grid, bool adv) {
  models::ImageSet out{grid.height, grid.width, grid.channels, {}, {}};
  for (const auto& e : set) out.append(adv ? e.adv : e.clean, e.label);
  return out;
}

std::vector<std::size_t> ids_of(const std::vector<AdvExample>& set) {
  std::vector<std::size_t> ids;
  for (const auto& e : set) ids.push_back(e.image_id);
  return ids;
}

double success_rate(const std::vector<AdvExample>& set) {
  return static_cast<double>(std::count_if(set.begin(), set.end(), [](const auto& e) { return e.success; })) /
         static_cast<double>(set.size());
}

double robust_accuracy(const std::vector<AdvExample>& set) {
  return static_cast<double>(
             std::count_if(set.begin(), set.end(), [](const auto& e) { return e.prediction == e.label; })) /
         static_cast<double>(set.size());
}

// Number of examples that leave their norm ball or the [0,1] box.
std::size_t violations(const std::vector<AdvExample>& set, const AttackSpec& spec) {
  std::size_t bad = 0;
  for (const auto& e : set) {
    bool ok = std::all_of(e.adv.begin(), e.adv.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    if (attacks::is_l2(spec.kind)) {
      if (spec.kind == attacks::AttackKind::kPgdL2) ok = ok && e.l2 <= spec.epsilon + 1e-9;
    } else {
      ok = ok && e.linf <= spec.epsilon + 1e-9;
    }
    bad += !ok;
  }
  return bad;
}

}  // namespace

struct Pipeline::State {
  std::optional<Splits> splits;
  std::optional<models::ClassifierModel> classifier;
  std::optional<models::MaeModel> mae;
  std::map<std::string, std::vector<AdvExample>> adv;
};

Pipeline::Pipeline(ExperimentConfig cfg, RunDir run, Logger log)
    : cfg_(std::move(cfg)), run_(std::move(run)), log_(std::move(log)), state_(std::make_shared<State>()) {
  const std::string echo = dump_config(cfg_);
  if (run_.has("config.json")) {
    const auto recorded = config_from_json(nlohmann::json::parse(run_.read_text("config.json"), nullptr, true, true));
    if (dump_config(recorded) != echo)
      throw ConfigError("config differs from the one recorded in " + run_.path("config.json").string());
  } else {
    run_.write_text("config.json", echo);
  }
}

const Splits& Pipeline::data() {
  if (!state_->splits) {
    const auto& d = cfg_.data;
    models::ImageSet all;
    if (d.format == "synthetic") {
      GlyphConfig g;
      g.side = cfg_.classifier.grid.height;
      g.count = d.synthetic_count;
      g.seed = d.seed;
      all = make_glyphs(g);
    } else {
      all = ingest_dataset(d.format, d.images, d.labels);
    }
    if (all.height != cfg_.classifier.grid.height || all.width != cfg_.classifier.grid.width ||
        all.channels != cfg_.classifier.grid.channels)
      throw DatasetError("dataset image shape does not match the model grid");
    state_->splits = split_dataset(all, d.train, d.calibration, d.test, d.seed);
  }
  return *state_->splits;
}

void Pipeline::require(const std::string& stage, const std::vector<std::string>& rels) const {
  std::vector<std::string> missing;
  for (const auto& r : rels)
    if (!run_.has(r)) missing.push_back(r);
  if (missing.empty()) return;
  std::string msg = "missing inputs:";
  for (const auto& m : missing) msg += " " + m;
  throw StageError(stage, msg + " (run the earlier stages first)");
}

void Pipeline::stage(const std::string& name, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  if (log_) log_("[" + name + "] start");
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(run_.path("logs").string() + "/timing.csv", std::ios::app) << name << "," << secs << "\n";
  if (log_) log_("[" + name + "] done in " + fmt(secs) + " s");
}

namespace {

void ensure_logs(const RunDir& run) { fs::create_directories(run.path("logs")); }

models::ClassifierModel& classifier_of(std::optional<models::ClassifierModel>& slot, const RunDir& run) {
  if (!slot) slot.emplace(models::load_classifier(run.path("checkpoints/classifier.ckpt")));
  return *slot;
}

models::MaeModel& mae_of(std::optional<models::MaeModel>& slot, const RunDir& run) {
  if (!slot) slot.emplace(models::load_mae(run.path("checkpoints/mae.ckpt")));
  return *slot;
}

std::string train_log_csv(const models::TrainLog& log) {
  CsvWriter w({"step", "epoch", "loss", "lr"});
  for (const auto& r : log.rows) w.row({fmt(r.step), fmt(r.epoch), fmt(r.loss), fmt(r.lr)});
  return w.str();
}

}  // namespace

void Pipeline::train_classifier() {
  ensure_logs(run_);
  stage("train-clf", [&] {
    const auto& s = data();
    models::ClassifierModel model(cfg_.classifier);
    std::size_t shown = 0;
    auto log = models::train_classifier(model, s.train, cfg_.classifier_train, [&](const auto& row) {
      if (log_ && row.epoch != shown) log_("  classifier epoch " + fmt(row.epoch) + " loss " + fmt(row.loss));
      shown = row.epoch;
    });
    models::save_classifier(run_.claim("checkpoints/classifier.ckpt"), model);
    run_.write_text("training/classifier_log.csv", train_log_csv(log));
    const double acc = models::accuracy(models::predict(model, s.test), s.test.labels);
    run_.write_text("training/classifier.json", nlohmann::json{{"test_accuracy", acc}}.dump(2) + "\n");
    if (log_) log_("  clean test accuracy " + fmt(acc));
    state_->classifier.emplace(std::move(model));
  });
}

void Pipeline::train_mae() {
  ensure_logs(run_);
  stage("train-mae", [&] {
    const auto& s = data();
    models::MaeModel model(cfg_.mae);
    std::size_t shown = 0;
    auto log = models::train_mae(model, s.train, cfg_.mae_train, [&](const auto& row) {
      if (log_ && row.epoch != shown) log_("  mae epoch " + fmt(row.epoch) + " loss " + fmt(row.loss));
      shown = row.epoch;
    });
    models::save_mae(run_.claim("checkpoints/mae.ckpt"), model);
    run_.write_text("training/mae_log.csv", train_log_csv(log));
    const std::size_t n = cfg_.detection.reference_size;
    const auto ids = id_range(kCalibrationIdBase, n);
    const auto ref = detection::score_losses(s.calibration.subset(id_range(0, n)), model, cfg_.detection.masks,
                                             cfg_.detection.seed, ids);
    CsvWriter w({"image_id", "loss"});
    for (const auto& r : ref) w.row({fmt(r.image_id), fmt(r.loss)});
    run_.write_text("checkpoints/reference.csv", w.str());
    state_->mae.emplace(std::move(model));
  });
}

void Pipeline::attack() {
  ensure_logs(run_);
  require("attack", {"checkpoints/classifier.ckpt", "checkpoints/mae.ckpt"});
  stage("attack", [&] {
    const auto& s = data();
    auto& clf = classifier_of(state_->classifier, run_);
    auto& mae = mae_of(state_->mae, run_);
    const auto subset = s.test.subset(id_range(0, cfg_.attack_examples));
    const auto ids = id_range(kTestIdBase, cfg_.attack_examples);
    CsvWriter w({"attack", "kind", "epsilon", "examples", "attack_success", "robust_accuracy", "mean_linf",
                 "mean_l2", "violations"});
    attacks::AttackContext ctx{&clf, &mae, cfg_.detection.seed, cfg_.attack_batch, {}};
    for (const auto& spec : cfg_.attacks) {
      auto set = attacks::run_attack(subset, spec, ctx, ids);
      write_adv_set(run_.claim(adv_path(spec)), set, spec, cfg_.classifier.grid);
      double linf = 0.0, l2 = 0.0;
      for (const auto& e : set) linf += e.linf, l2 += e.l2;
      const double n = static_cast<double>(set.size());
      w.row({spec.label(), attacks::to_string(spec.kind), fmt(spec.epsilon), fmt(set.size()),
             fmt(success_rate(set)), fmt(robust_accuracy(set)), fmt(linf / n), fmt(l2 / n),
             fmt(violations(set, spec))});
      if (log_) log_("  " + spec.label() + " success " + fmt(success_rate(set)));
      state_->adv[spec.label()] = std::move(set);
    }
    run_.write_text("attack/summary.csv", w.str());
  });
}

namespace {

std::vector<double> read_reference(const RunDir& run) {
  return parse_csv(run.read_text("checkpoints/reference.csv")).numbers("loss");
}

std::string baseline_csv(const std::vector<std::size_t>& ids, const std::vector<double>& fs,
                         const std::vector<double>& nd, const std::vector<double>& td) {
  CsvWriter w({"image_id", "fs", "nd", "td"});
  for (std::size_t i = 0; i < ids.size(); ++i) w.row({fmt(ids[i]), fmt(fs[i]), fmt(nd[i]), fmt(td[i])});
  return w.str();
}

}  // namespace

void Pipeline::detect() {
  ensure_logs(run_);
  std::vector<std::string> needs = {"checkpoints/classifier.ckpt", "checkpoints/mae.ckpt", "checkpoints/reference.csv"};
  for (const auto& s : cfg_.attacks) needs.push_back(adv_path(s));
  require("detect", needs);
  stage("detect", [&] {
    const auto& dc = cfg_.detection;
    const auto& s = data();
    auto& clf = classifier_of(state_->classifier, run_);
    auto& mae = mae_of(state_->mae, run_);
    const detection::ReferenceDistribution ref(read_reference(run_));
    const detection::BootstrapConfig boot{dc.window, dc.bootstrap_batches, dc.seed};
    const double p_thr =
        dc.calibrate ? detection::calibrate_p_threshold(ref.values(), ref, dc.fpr_target, boot) : dc.p_threshold;
    run_.write_text("detection/threshold.json",
                    nlohmann::json{{"p_threshold", p_thr}, {"calibrated", dc.calibrate}}.dump(2) + "\n");

    const auto subset = s.test.subset(id_range(0, cfg_.attack_examples));
    const auto ids = id_range(kTestIdBase, cfg_.attack_examples);
    const auto clean = detection::score_losses(subset, mae, dc.masks, dc.seed, ids);
    const auto clean_loss = detection::loss_values(clean);
    models::ImageSet noisy = subset;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
      auto rng = models::stream(dc.seed, ids[i], 0x0015e);
      std::uniform_real_distribution<double> u(-kNoiseLevel, kNoiseLevel);
      for (auto& v : noisy.image(i)) v = std::clamp(v + u(rng), 0.0, 1.0);
    }
    const auto noisy_loss = detection::loss_values(detection::score_losses(noisy, mae, dc.masks, dc.seed, ids));
    {
      CsvWriter w({"image_id", "loss", "noisy_loss"});
      for (std::size_t i = 0; i < clean.size(); ++i) w.row({fmt(ids[i]), fmt(clean_loss[i]), fmt(noisy_loss[i])});
      run_.write_text("scores/clean.csv", w.str());
    }
    const auto clean_fs = detection::baseline_fs(subset, clf, dc.fs_bits);
    const auto clean_nd = detection::baseline_nd(subset, clf, dc.nd_radius, dc.nd_trials, dc.seed, ids);
    const auto clean_td = detection::baseline_td(subset, clf, dc.td);
    run_.write_text(baseline_path("clean"), baseline_csv(ids, clean_fs, clean_nd, clean_td));

    CsvWriter summary({"attack", "tpr_batch", "fpr_batch", "flag_rate", "tpr_mae", "tpr_fs", "tpr_nd", "tpr_td",
                       "loss_clean", "loss_adv", "welch_t", "welch_p"});
    for (const auto& spec : cfg_.attacks) {
      const auto& set = state_->adv.count(spec.label())
                            ? state_->adv[spec.label()]
                            : (state_->adv[spec.label()] = read_adv_set(run_.path(adv_path(spec))).examples);
      const auto adv_images = images_of(set, cfg_.classifier.grid, true);
      const auto adv_ids = ids_of(set);
      const auto scores = detection::score_losses(adv_images, mae, dc.masks, dc.seed, adv_ids);
      const auto adv_loss = detection::loss_values(scores);
      CsvWriter w({"image_id", "loss", "window", "D", "p", "verdict"});
      std::size_t flagged = 0, windows = 0;
      for (std::size_t first = 0; first + dc.window <= scores.size(); first += dc.window, ++windows) {
        const auto v = detection::detect_batch(std::span(scores).subspan(first, dc.window), ref, p_thr);
        flagged += v.is_adversarial;
        for (std::size_t i = first; i < first + dc.window; ++i)
          w.row({fmt(scores[i].image_id), fmt(scores[i].loss), fmt(windows), fmt(v.ks_statistic), fmt(v.p_value),
                 v.is_adversarial ? "1" : "0"});
      }
      run_.write_text(scores_path(spec), w.str());

      const auto fs = detection::baseline_fs(adv_images, clf, dc.fs_bits);
      const auto nd = detection::baseline_nd(adv_images, clf, dc.nd_radius, dc.nd_trials, dc.seed, adv_ids);
      const auto td = detection::baseline_td(adv_images, clf, dc.td);
      run_.write_text(baseline_path(safe_name(spec.label())), baseline_csv(adv_ids, fs, nd, td));

      const auto batch = detection::batch_tpr_at_fpr(clean_loss, adv_loss, ref, dc.fpr_target, boot);
      const auto welch = welch_t_test(adv_loss, clean_loss);
      summary.row({spec.label(), fmt(batch.tpr), fmt(batch.fpr),
                   fmt(windows ? static_cast<double>(flagged) / static_cast<double>(windows) : 0.0),
                   fmt(detection::tpr_at_fpr(clean_loss, adv_loss, dc.fpr_target)),
                   fmt(detection::tpr_at_fpr(clean_fs, fs, dc.fpr_target)),
                   fmt(detection::tpr_at_fpr(clean_nd, nd, dc.fpr_target)),
                   fmt(detection::tpr_at_fpr(clean_td, td, dc.fpr_target)), fmt(mean(clean_loss)),
                   fmt(mean(adv_loss)), fmt(welch.t), fmt(welch.p_greater)});
      if (log_) log_("  " + spec.label() + " batch tpr " + fmt(batch.tpr));
    }
    run_.write_text("detection/summary.csv", summary.str());
  });
}

namespace {

void write_repaired(const RunDir& run, const std::string& name, const std::vector<AdvExample>& set,
                    const repair::RepairReport& report, const std::vector<double>& rescored,
                    const AttackSpec& spec, const models::PatchGrid& grid) {
  std::vector<AdvExample> out;
  CsvWriter w({"image_id", "label", "loss_before", "loss_after", "scored_loss", "prediction_before",
               "prediction_after"});
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = report.results[i];
    AdvExample e = set[i];
    e.adv = r.adapted;
    e.prediction = r.prediction_after;
    e.success = r.prediction_after != e.label;
    e.linf = attacks::linf_distance(e.adv, e.clean);
    e.l2 = attacks::l2_distance(e.adv, e.clean);
    out.push_back(std::move(e));
    w.row({fmt(r.image_id), fmt(set[i].label), fmt(r.loss_before), fmt(r.loss_after), fmt(rescored[i]),
           fmt(r.prediction_before), fmt(r.prediction_after)});
  }
  write_adv_set(run.claim(repaired_path(name)), out, spec, grid);
  run.write_text(repair_csv_path(name), w.str());
}

std::size_t repair_violations(const repair::RepairReport& report, double eps) {
  std::size_t bad = 0;
  for (const auto& r : report.results) {
    const bool box = std::all_of(r.adapted.begin(), r.adapted.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    bad += !(box && attacks::linf_distance(r.adapted, r.input) <= eps + 1e-9);
  }
  return bad;
}

}  // namespace

void Pipeline::repair() {
  ensure_logs(run_);
  std::vector<std::string> needs = {"checkpoints/classifier.ckpt", "checkpoints/mae.ckpt", "checkpoints/reference.csv"};
  for (const auto& s : cfg_.attacks) needs.push_back(adv_path(s));
  require("repair", needs);
  stage("repair", [&] {
    const auto& s = data();
    const auto& dc = cfg_.detection;
    auto& clf = classifier_of(state_->classifier, run_);
    auto& mae = mae_of(state_->mae, run_);
    const detection::ReferenceDistribution ref(read_reference(run_));
    auto gate_for = [&](const models::ImageSet& images, const std::vector<std::size_t>& ids) {
      std::vector<std::uint8_t> gate;
      if (!cfg_.gated_repair) return gate;
      for (const auto& l : detection::score_losses(images, mae, dc.masks, dc.seed, ids))
        gate.push_back(detection::detect_single(l, ref, 1.0 - dc.fpr_target));
      return gate;
    };
    CsvWriter w({"set", "examples", "acc_before", "acc_after", "mean_loss_before", "mean_loss_after",
                 "median_loss_before", "median_loss_after", "fraction_decreased", "scored_loss_after",
                 "violations"});
    auto one = [&](const std::string& name, const std::vector<AdvExample>& set, const AttackSpec& spec) {
      const auto images = images_of(set, cfg_.classifier.grid, true);
      const auto ids = ids_of(set);
      const auto report = repair::repair_and_classify(set, mae, clf, cfg_.repair, gate_for(images, ids));
      models::ImageSet adapted{images.height, images.width, images.channels, {}, {}};
      for (const auto& r : report.results) adapted.append(r.adapted, 0);
      const auto rescored = detection::loss_values(detection::score_losses(adapted, mae, dc.masks, dc.seed, ids));
      write_repaired(run_, name, set, report, rescored, spec, cfg_.classifier.grid);
      w.row({name, fmt(report.count), fmt(report.accuracy_before), fmt(report.accuracy_after),
             fmt(report.mean_loss_before), fmt(report.mean_loss_after), fmt(report.median_loss_before),
             fmt(report.median_loss_after), fmt(report.fraction_loss_decreased), fmt(mean(rescored)),
             fmt(repair_violations(report, cfg_.repair.epsilon))});
      if (log_) log_("  " + name + " acc " + fmt(report.accuracy_before) + " -> " + fmt(report.accuracy_after));
    };
    const auto subset = s.test.subset(id_range(0, cfg_.attack_examples));
    one("clean", repair::as_examples(subset, clf, id_range(kTestIdBase, cfg_.attack_examples)), AttackSpec{});
    for (const auto& spec : cfg_.attacks) {
      if (!state_->adv.count(spec.label()))
        state_->adv[spec.label()] = read_adv_set(run_.path(adv_path(spec))).examples;
      one(safe_name(spec.label()), state_->adv[spec.label()], spec);
    }
    run_.write_text("repair/summary.csv", w.str());
  });
}

namespace {

const AttackSpec& sweep_attack(const ExperimentConfig& cfg) {
  for (const auto& s : cfg.attacks)
    if (s.kind == attacks::AttackKind::kPgdLinf) return s;
  return cfg.attacks.front();
}

std::string sweep_csv(const std::vector<repair::SweepPoint>& curve, const std::string& key) {
  CsvWriter w({key, "accuracy", "mean_loss"});
  for (const auto& p : curve) w.row({fmt(p.value), fmt(p.accuracy), fmt(p.mean_loss)});
  return w.str();
}

}  // namespace

void Pipeline::sweep_iters() {
  ensure_logs(run_);
  if (cfg_.attacks.empty()) {
    stage("sweep-iters", [&] { run_.write_text("sweeps/iters.csv", sweep_csv({}, "iters")); });
    return;
  }
  require("sweep-iters", {"checkpoints/classifier.ckpt", "checkpoints/mae.ckpt", adv_path(sweep_attack(cfg_))});
  stage("sweep-iters", [&] {
    const auto set = read_adv_set(run_.path(adv_path(sweep_attack(cfg_)))).examples;
    const auto curve = repair::sweep_iters(set, mae_of(state_->mae, run_), classifier_of(state_->classifier, run_),
                                           cfg_.repair, cfg_.sweeps.iters);
    run_.write_text("sweeps/iters.csv", sweep_csv(curve, "iters"));
  });
}

void Pipeline::sweep_eps() {
  ensure_logs(run_);
  if (cfg_.attacks.empty()) {
    stage("sweep-eps", [&] { run_.write_text("sweeps/eps.csv", sweep_csv({}, "epsilon")); });
    return;
  }
  require("sweep-eps", {"checkpoints/classifier.ckpt", "checkpoints/mae.ckpt", adv_path(sweep_attack(cfg_))});
  stage("sweep-eps", [&] {
    const auto set = read_adv_set(run_.path(adv_path(sweep_attack(cfg_)))).examples;
    const auto curve = repair::sweep_epsilon(set, mae_of(state_->mae, run_),
                                             classifier_of(state_->classifier, run_), cfg_.repair,
                                             cfg_.sweeps.epsilons);
    run_.write_text("sweeps/eps.csv", sweep_csv(curve, "epsilon"));
  });
}

void Pipeline::daa_curve() {
  ensure_logs(run_);
  require("daa-curve", {"checkpoints/classifier.ckpt", "checkpoints/mae.ckpt"});
  stage("daa-curve", [&] {
    const auto& s = data();
    auto& clf = classifier_of(state_->classifier, run_);
    auto& mae = mae_of(state_->mae, run_);
    const std::size_t n = cfg_.sweeps.daa_examples;
    const auto subset = s.test.subset(id_range(0, n));
    const auto ids = id_range(kTestIdBase, n);
    attacks::AttackContext ctx{&clf, &mae, cfg_.detection.seed, cfg_.attack_batch, {}};
    CsvWriter w({"lambda", "attack_success", "robust_before", "robust_after", "mean_loss_adv", "mean_loss_repaired",
                 "violations"});
    for (double lambda : cfg_.sweeps.daa_lambdas) {
      AttackSpec spec = cfg_.sweeps.daa;
      spec.lambda = lambda;
      const auto set = attacks::run_attack(subset, spec, ctx, ids);
      write_adv_set(run_.claim("daa/" + lambda_name(lambda) + ".adv"), set, spec, cfg_.classifier.grid);
      const auto report = repair::repair_and_classify(set, mae, clf, cfg_.repair);
      w.row({fmt(lambda), fmt(success_rate(set)), fmt(report.accuracy_before), fmt(report.accuracy_after),
             fmt(report.mean_loss_before), fmt(report.mean_loss_after),
             fmt(violations(set, spec) + repair_violations(report, cfg_.repair.epsilon))});
      if (log_)
        log_("  lambda " + fmt(lambda) + " success " + fmt(success_rate(set)) + " repaired acc " +
             fmt(report.accuracy_after));
    }
    run_.write_text("daa/curve.csv", w.str());
  });
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "attack",  "kind",   "epsilon", "examples",   "attack_success", "tpr_batch", "tpr_mae",  "tpr_fs",
      "tpr_nd",  "tpr_td", "acc_before", "acc_after", "loss_clean",   "loss_adv",  "loss_repaired"};
  return cols;
}

std::string results_csv(const ResultTable& t) {
  CsvWriter w(result_columns());
  for (const auto& r : t.rows)
    w.row({r.attack, r.kind, fmt(r.epsilon), fmt(r.examples), fmt(r.attack_success), fmt(r.tpr_batch),
           fmt(r.tpr_mae), fmt(r.tpr_fs), fmt(r.tpr_nd), fmt(r.tpr_td), fmt(r.acc_before), fmt(r.acc_after),
           fmt(r.loss_clean), fmt(r.loss_adv), fmt(r.loss_repaired)});
  return w.str();
}

std::string clean_csv(const ResultTable& t) {
  CsvWriter w({"metric", "value"});
  w.row({"clean_accuracy", fmt(t.clean_accuracy)});
  w.row({"clean_accuracy_subset", fmt(t.clean_accuracy_subset)});
  w.row({"clean_accuracy_repaired", fmt(t.clean_accuracy_repaired)});
  w.row({"loss_clean", fmt(t.loss_clean)});
  w.row({"loss_noisy", fmt(t.loss_noisy)});
  w.row({"p_threshold", fmt(t.p_threshold)});
  return w.str();
}

ResultTable parse_results(const std::string& results, const std::string& clean) {
  ResultTable t;
  const auto rt = parse_csv(results);
  if (rt.header != result_columns()) throw ArtifactError("results.csv: unexpected header");
  for (const auto& c : rt.rows) {
    ResultRow r;
    r.attack = c[0];
    r.kind = c[1];
    r.epsilon = std::stod(c[2]);
    r.examples = std::stoul(c[3]);
    double* fields[] = {&r.attack_success, &r.tpr_batch, &r.tpr_mae, &r.tpr_fs,   &r.tpr_nd,  &r.tpr_td,
                        &r.acc_before,     &r.acc_after, &r.loss_clean, &r.loss_adv, &r.loss_repaired};
    for (std::size_t k = 0; k < std::size(fields); ++k) *fields[k] = std::stod(c[4 + k]);
    t.rows.push_back(r);
  }
  const auto ct = parse_csv(clean);
  std::map<std::string, double> m;
  for (const auto& c : ct.rows) m[c.at(0)] = std::stod(c.at(1));
  t.clean_accuracy = m.at("clean_accuracy");
  t.clean_accuracy_subset = m.at("clean_accuracy_subset");
  t.clean_accuracy_repaired = m.at("clean_accuracy_repaired");
  t.loss_clean = m.at("loss_clean");
  t.loss_noisy = m.at("loss_noisy");
  t.p_threshold = m.at("p_threshold");
  return t;
}

namespace {

std::map<std::string, std::vector<std::string>> row_map(const CsvTable& t, const std::string& key) {
  std::map<std::string, std::vector<std::string>> out;
  const auto k = t.column(key);
  for (const auto& r : t.rows) out[r[k]] = r;
  return out;
}

double cell(const CsvTable& t, const std::vector<std::string>& row, const std::string& col) {
  return std::stod(row.at(t.column(col)));
}

void put_report(const RunDir& run, const std::string& rel, const std::string& content) {
  const auto p = run.path(rel);
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

}  // namespace

ResultTable Pipeline::report() {
  ensure_logs(run_);
  ResultTable table;
  stage("report", [&] {
    std::vector<std::string> missing;
    std::vector<std::string> needs = {"training/classifier.json", "attack/summary.csv", "detection/summary.csv",
                                      "detection/threshold.json", "scores/clean.csv", "repair/summary.csv",
                                      "sweeps/iters.csv", "sweeps/eps.csv", "daa/curve.csv"};
    for (const auto& s : cfg_.attacks) {
      needs.push_back(scores_path(s));
      needs.push_back(repair_csv_path(safe_name(s.label())));
    }
    const std::map<std::string, std::string> producer = {
        {"training", "train-clf"}, {"attack", "attack"},   {"detection", "detect"}, {"scores", "detect"},
        {"repair", "repair"},      {"daa", "daa-curve"}};
    std::set<std::string> rerun;
    for (const auto& n : needs) {
      if (run_.has(n)) continue;
      missing.push_back(n);
      const auto dir = n.substr(0, n.find('/'));
      if (dir == "sweeps") rerun.insert(n == "sweeps/iters.csv" ? "sweep-iters" : "sweep-eps");
      else rerun.insert(producer.at(dir));
    }
    if (!missing.empty()) {
      std::string msg = "missing artifacts:";
      for (const auto& m : missing) msg += " " + m;
      msg += "; rerun:";
      for (const auto& r : rerun) msg += " " + r;
      throw ArtifactError(msg);
    }

    const auto attack_t = parse_csv(run_.read_text("attack/summary.csv"));
    const auto det_t = parse_csv(run_.read_text("detection/summary.csv"));
    const auto rep_t = parse_csv(run_.read_text("repair/summary.csv"));
    const auto attack_rows = row_map(attack_t, "attack");
    const auto det_rows = row_map(det_t, "attack");
    const auto rep_rows = row_map(rep_t, "set");
    const auto clean_scores = parse_csv(run_.read_text("scores/clean.csv"));
    const auto clean_loss = clean_scores.numbers("loss");

    table.clean_accuracy = nlohmann::json::parse(run_.read_text("training/classifier.json")).at("test_accuracy");
    table.p_threshold = nlohmann::json::parse(run_.read_text("detection/threshold.json")).at("p_threshold");
    table.loss_clean = mean(clean_loss);
    table.loss_noisy = mean(clean_scores.numbers("noisy_loss"));
    table.clean_accuracy_subset = cell(rep_t, rep_rows.at("clean"), "acc_before");
    table.clean_accuracy_repaired = cell(rep_t, rep_rows.at("clean"), "acc_after");

    for (const auto& spec : cfg_.attacks) {
      const auto label = spec.label();
      const auto& a = attack_rows.at(label);
      const auto& d = det_rows.at(label);
      const auto& r = rep_rows.at(safe_name(label));
      ResultRow row;
      row.attack = label;
      row.kind = attacks::to_string(spec.kind);
      row.epsilon = spec.epsilon;
      row.examples = std::stoul(a.at(attack_t.column("examples")));
      row.attack_success = cell(attack_t, a, "attack_success");
      row.tpr_batch = cell(det_t, d, "tpr_batch");
      row.tpr_mae = cell(det_t, d, "tpr_mae");
      row.tpr_fs = cell(det_t, d, "tpr_fs");
      row.tpr_nd = cell(det_t, d, "tpr_nd");
      row.tpr_td = cell(det_t, d, "tpr_td");
      row.acc_before = cell(rep_t, r, "acc_before");
      row.acc_after = cell(rep_t, r, "acc_after");
      row.loss_clean = cell(det_t, d, "loss_clean");
      row.loss_adv = cell(det_t, d, "loss_adv");
      row.loss_repaired = cell(rep_t, r, "scored_loss_after");
      table.rows.push_back(row);

      const auto adv_loss = parse_csv(run_.read_text(scores_path(spec))).numbers("loss");
      const auto rep_loss = parse_csv(run_.read_text(repair_csv_path(safe_name(label)))).numbers("scored_loss");
      double lo = INFINITY, hi = -INFINITY;
      for (const auto* v : {&clean_loss, &adv_loss, &rep_loss})
        for (double x : *v) lo = std::min(lo, x), hi = std::max(hi, x);
      if (!(hi > lo)) hi = lo + 1.0;
      const auto hc = histogram(clean_loss, lo, hi, kHistogramBins);
      const auto ha = histogram(adv_loss, lo, hi, kHistogramBins);
      const auto hr = histogram(rep_loss, lo, hi, kHistogramBins);
      CsvWriter hw({"bin_lo", "bin_hi", "clean", "adversarial", "repaired"});
      for (std::size_t k = 0; k < kHistogramBins; ++k)
        hw.row({fmt(lo + hc.bin_width() * static_cast<double>(k)), fmt(lo + hc.bin_width() * static_cast<double>(k + 1)),
                fmt(hc.counts[k]), fmt(ha.counts[k]), fmt(hr.counts[k])});
      const auto name = safe_name(label);
      put_report(run_, "report/hist_" + name + ".csv", hw.str());
      put_report(run_, "report/hist_" + name + ".svg",
                 histogram_svg({{"clean", hc}, {"adversarial", ha}, {"repaired", hr}},
                               {"MAE loss: " + label, "MAE loss", "density"}));
    }

    const auto daa = parse_csv(run_.read_text("daa/curve.csv"));
    put_report(run_, "report/daa_curve.csv", run_.read_text("daa/curve.csv"));
    put_report(run_, "report/daa_curve.svg",
               line_plot_svg({{"attack only", daa.numbers("lambda"), daa.numbers("robust_before"), true},
                              {"after repair", daa.numbers("lambda"), daa.numbers("robust_after"), false}},
                             {"Defense-aware attack", "lambda", "robust accuracy"}));
    const auto it = parse_csv(run_.read_text("sweeps/iters.csv"));
    put_report(run_, "report/sweep_iters.csv", run_.read_text("sweeps/iters.csv"));
    put_report(run_, "report/sweep_iters.svg",
               line_plot_svg({{"accuracy", it.numbers("iters"), it.numbers("accuracy"), false}},
                             {"Repair iterations", "iterations", "robust accuracy"}));
    const auto ep = parse_csv(run_.read_text("sweeps/eps.csv"));
    put_report(run_, "report/sweep_eps.csv", run_.read_text("sweeps/eps.csv"));
    put_report(run_, "report/sweep_eps.svg",
               line_plot_svg({{"accuracy", ep.numbers("epsilon"), ep.numbers("accuracy"), false}},
                             {"Repair epsilon", "epsilon", "robust accuracy"}));
    put_report(run_, "results.csv", results_csv(table));
    put_report(run_, "clean.csv", clean_csv(table));
  });
  return table;
}

ResultTable Pipeline::run_all() {
  train_classifier();
  train_mae();
  attack();
  detect();
  repair();
  sweep_iters();
  sweep_eps();
  daa_curve();
  auto table = report();
  run_.write_checksums();
  return table;
}

ResultTable run_pipeline(const ExperimentConfig& cfg, Logger log, RunDir* created) {
  validate(cfg);
  auto run = RunDir::create(cfg.output_dir);
  if (created) *created = run;
  if (log) log("run directory " + run.root().string());
  Pipeline p(cfg, run, std::move(log));
  return p.run_all();
}

ResultTable report(const fs::path& run_dir, Logger log) {
  RunDir run(run_dir);
  if (!run.has("config.json")) throw ArtifactError("missing artifacts: config.json; rerun: run-all");
  Pipeline p(load_config(run.path("config.json")), run, std::move(log));
  return p.report();
}

}  // namespace maeguard::harness
