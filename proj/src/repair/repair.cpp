#include "maeguard/repair/repair.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "maeguard/models/rng.hpp"

namespace maeguard::repair {

std::string to_string(RepairInit init) { return init == RepairInit::kZero ? "zero" : "uniform"; }

RepairInit parse_repair_init(const std::string& name) {
  if (name == "zero") return RepairInit::kZero;
  if (name == "uniform") return RepairInit::kUniform;
  throw std::invalid_argument("unknown repair init '" + name + "' (expected zero or uniform)");
}

void RepairConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("repair: epsilon must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("repair: alpha must be positive");
  if (masks < 1) throw std::invalid_argument("repair: need at least one mask");
  if (batch_size < 1) throw std::invalid_argument("repair: batch_size must be positive");
}

namespace {

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

models::ImageSet to_images(std::span<const attacks::AdvExample> set, const models::PatchGrid& grid,
                           bool adversarial) {
  models::ImageSet out{grid.height, grid.width, grid.channels, {}, {}};
  for (const auto& ex : set) out.append(adversarial ? ex.adv : ex.clean, ex.label);
  return out;
}

std::vector<std::size_t> ids_of(std::span<const attacks::AdvExample> set) {
  std::vector<std::size_t> ids;
  for (const auto& ex : set) ids.push_back(ex.image_id);
  return ids;
}

}  // namespace

std::vector<RepairResult> repair(const models::ImageSet& images, const models::MaeModel& mae,
                                 const RepairConfig& cfg, std::span<const std::size_t> image_ids,
                                 const RepairOptions& options) {
  cfg.validate();
  if (images.image_size() != mae.config().grid.image_size())
    throw std::invalid_argument("repair: image size does not match the MAE grid");
  std::vector<std::size_t> ids(image_ids.begin(), image_ids.end());
  if (ids.empty()) {
    ids.resize(images.size());
    std::iota(ids.begin(), ids.end(), 0);
  }
  if (ids.size() != images.size()) throw std::invalid_argument("repair: one id per image required");
  for (auto s : options.snapshot_steps)
    if (s > cfg.iters) throw std::invalid_argument("repair: snapshot step beyond iters");
  if (options.snapshots) {
    options.snapshots->assign(options.snapshot_steps.size(), {});
  }

  const std::size_t dim = images.image_size();
  std::vector<RepairResult> out(images.size());
  for (std::size_t first = 0; first < images.size(); first += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, images.size() - first);
    const std::span<const std::size_t> batch_ids(ids.data() + first, n);
    auto x0 = images.batch(first, n);
    const auto origin = x0.values();
    std::vector<std::vector<models::MaskPattern>> masks;
    for (std::size_t i = 0; i < n; ++i)
      masks.push_back(models::fixed_masks(mae.config(), cfg.seed ^ 0x7e9a1ULL, batch_ids[i], cfg.masks));

    auto x = x0.clone();
    auto xv = x.mutable_values();
    if (cfg.init == RepairInit::kUniform) {
      std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
      for (std::size_t i = 0; i < n; ++i) {
        auto rng = models::stream(cfg.seed, batch_ids[i], 0x1a17);
        for (std::size_t j = 0; j < dim; ++j) xv[i * dim + j] += u(rng);
      }
      attacks::clip_box(xv);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = out[first + i];
      r.image_id = batch_ids[i];
      r.input.assign(origin.begin() + static_cast<long>(i * dim), origin.begin() + static_cast<long>((i + 1) * dim));
    }
    const auto before = models::mask_set_loss(mae, x0, masks, false);
    for (std::size_t i = 0; i < n; ++i) out[first + i].loss_before = before.losses[i];

    for (std::size_t step = 0;; ++step) {
      if (options.on_iterate) options.on_iterate(step, batch_ids, xv);
      for (std::size_t k = 0; k < options.snapshot_steps.size(); ++k) {
        if (options.snapshot_steps[k] != step) continue;
        for (std::size_t i = 0; i < n; ++i)
          (*options.snapshots)[k].emplace_back(xv.begin() + static_cast<long>(i * dim),
                                               xv.begin() + static_cast<long>((i + 1) * dim));
      }
      const bool last = step == cfg.iters;
      const auto eval = models::mask_set_loss(mae, x, masks, !last);
      for (std::size_t i = 0; i < n; ++i) out[first + i].trajectory.push_back(eval.losses[i]);
      if (last) break;
      for (std::size_t j = 0; j < xv.size(); ++j) xv[j] -= cfg.alpha * sign(eval.grad[j]);
      attacks::project_linf(xv, origin, cfg.epsilon);
      attacks::clip_box(xv);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto& r = out[first + i];
      r.adapted.assign(xv.begin() + static_cast<long>(i * dim), xv.begin() + static_cast<long>((i + 1) * dim));
      r.loss_after = r.trajectory.back();
    }
    if (options.classifier) {
      models::ImageSet pair{images.height, images.width, images.channels, {}, {}};
      for (std::size_t i = 0; i < n; ++i) pair.append(out[first + i].input, 0);
      for (std::size_t i = 0; i < n; ++i) pair.append(out[first + i].adapted, 0);
      const auto pred = models::predict(*options.classifier, pair);
      for (std::size_t i = 0; i < n; ++i) {
        out[first + i].prediction_before = pred[i];
        out[first + i].prediction_after = pred[n + i];
      }
    }
  }
  return out;
}

RepairResult repair(std::span<const double> image, const models::PatchGrid& grid,
                    const models::MaeModel& mae, const RepairConfig& cfg, std::size_t image_id) {
  models::ImageSet one{grid.height, grid.width, grid.channels, {}, {}};
  one.append(image, 0);
  const std::size_t id[] = {image_id};
  return std::move(repair(one, mae, cfg, id).front());
}

RepairReport repair_and_classify(std::span<const attacks::AdvExample> adv_set,
                                 const models::MaeModel& mae, const models::ClassifierModel& classifier,
                                 const RepairConfig& cfg, std::span<const std::uint8_t> gate) {
  if (adv_set.empty()) throw std::invalid_argument("repair_and_classify: empty adversarial set");
  if (!gate.empty() && gate.size() != adv_set.size())
    throw std::invalid_argument("repair_and_classify: gate size does not match the set");
  const auto& grid = mae.config().grid;
  const auto images = to_images(adv_set, grid, true);
  const auto ids = ids_of(adv_set);
  RepairOptions opts;
  opts.classifier = &classifier;
  RepairReport report;
  report.count = adv_set.size();
  report.results = repair(images, mae, cfg, ids, opts);
  std::size_t right_before = 0, right_after = 0, decreased = 0;
  std::vector<double> lb, la;
  for (std::size_t i = 0; i < adv_set.size(); ++i) {
    auto& r = report.results[i];
    if (!gate.empty() && !gate[i]) {
      r.adapted = r.input;
      r.loss_after = r.loss_before;
      r.prediction_after = r.prediction_before;
    }
    right_before += r.prediction_before == adv_set[i].label;
    right_after += r.prediction_after == adv_set[i].label;
    decreased += r.loss_after < r.loss_before;
    lb.push_back(r.loss_before);
    la.push_back(r.loss_after);
  }
  const double n = static_cast<double>(adv_set.size());
  report.accuracy_before = right_before / n;
  report.accuracy_after = right_after / n;
  report.fraction_loss_decreased = decreased / n;
  report.mean_loss_before = std::accumulate(lb.begin(), lb.end(), 0.0) / n;
  report.mean_loss_after = std::accumulate(la.begin(), la.end(), 0.0) / n;
  report.median_loss_before = median(lb);
  report.median_loss_after = median(la);
  return report;
}

std::vector<attacks::AdvExample> as_examples(const models::ImageSet& images,
                                             const models::ClassifierModel& classifier,
                                             std::span<const std::size_t> image_ids) {
  const auto pred = models::predict(classifier, images);
  std::vector<attacks::AdvExample> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& ex = out[i];
    ex.image_id = image_ids.empty() ? i : image_ids[i];
    ex.clean.assign(images.image(i).begin(), images.image(i).end());
    ex.adv = ex.clean;
    ex.label = images.labels.at(i);
    ex.prediction = pred[i];
    ex.success = pred[i] != ex.label;
  }
  return out;
}

std::vector<SweepPoint> sweep_iters(std::span<const attacks::AdvExample> adv_set,
                                    const models::MaeModel& mae,
                                    const models::ClassifierModel& classifier, const RepairConfig& base,
                                    const std::vector<std::size_t>& iters_grid) {
  if (adv_set.empty()) throw std::invalid_argument("sweep_iters: empty adversarial set");
  if (iters_grid.empty()) return {};
  RepairConfig cfg = base;
  cfg.iters = *std::max_element(iters_grid.begin(), iters_grid.end());
  const auto& grid = mae.config().grid;
  const auto images = to_images(adv_set, grid, true);
  const auto ids = ids_of(adv_set);
  std::vector<std::vector<std::vector<double>>> snaps;
  RepairOptions opts;
  opts.snapshot_steps = iters_grid;
  opts.snapshots = &snaps;
  const auto results = repair(images, mae, cfg, ids, opts);
  std::vector<SweepPoint> curve;
  for (std::size_t k = 0; k < iters_grid.size(); ++k) {
    models::ImageSet adapted{grid.height, grid.width, grid.channels, {}, {}};
    // Zero iterations means no repair at all, so the init noise is left out.
    const bool none = iters_grid[k] == 0;
    for (std::size_t i = 0; i < adv_set.size(); ++i)
      adapted.append(none ? std::span<const double>(adv_set[i].adv) : snaps[k][i], adv_set[i].label);
    SweepPoint p;
    p.value = static_cast<double>(iters_grid[k]);
    p.accuracy = models::accuracy(models::predict(classifier, adapted), adapted.labels);
    for (const auto& r : results) p.mean_loss += none ? r.loss_before : r.trajectory[iters_grid[k]];
    p.mean_loss /= static_cast<double>(results.size());
    curve.push_back(p);
  }
  return curve;
}

std::vector<SweepPoint> sweep_epsilon(std::span<const attacks::AdvExample> adv_set,
                                      const models::MaeModel& mae,
                                      const models::ClassifierModel& classifier, const RepairConfig& base,
                                      const std::vector<double>& eps_grid) {
  std::vector<SweepPoint> curve;
  for (double eps : eps_grid) {
    RepairConfig cfg = base;
    cfg.epsilon = eps;
    cfg.alpha = eps / 4.0;
    cfg.iters = 5;
    const auto report = repair_and_classify(adv_set, mae, classifier, cfg);
    curve.push_back({eps, report.accuracy_after, report.mean_loss_after});
  }
  return curve;
}

}  // namespace maeguard::repair
