#include "maeguard/models/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "maeguard/models/rng.hpp"

namespace maeguard::models {

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "step,epoch,loss,lr\n";
  for (const auto& r : rows) out << r.step << ',' << r.epoch << ',' << r.loss << ',' << r.lr << '\n';
}

std::vector<double> TrainLog::moving_average(std::size_t window) const {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    acc += rows[i].loss;
    if (i >= window) acc -= rows[i - window].loss;
    if (i + 1 >= window) out.push_back(acc / static_cast<double>(window));
  }
  return out;
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = stream(seed, 0x5eed, epoch);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

std::string describe(const ParamList& params) {
  std::ostringstream os;
  for (const auto& p : params) {
    double sq = 0.0;
    bool finite = true;
    for (double v : p.tensor.values()) {
      sq += v * v;
      finite = finite && std::isfinite(v);
    }
    os << "\n  " << p.name << ": |w|=" << std::sqrt(sq) << (finite ? "" : " (non-finite)");
  }
  return os.str();
}

template <typename LossFn>
TrainLog run(const char* what, const ParamList& params, const ImageSet& data,
             const TrainConfig& cfg, const StepCallback& on_step, LossFn&& loss_fn) {
  if (data.empty()) throw std::invalid_argument(std::string(what) + ": empty training set");
  if (cfg.batch_size == 0) throw std::invalid_argument(std::string(what) + ": batch_size must be >= 1");
  const std::size_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  MomentumSgd opt(params, cfg.sgd, per_epoch * cfg.epochs);
  TrainLog log;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      std::span<const std::size_t> idx(order.data() + first, count);
      Graph g(ad::GradScope::kAll);
      auto loss = loss_fn(g, idx, step);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << what << ": non-finite loss " << value << " at step " << step << " (epoch " << epoch
           << ", lr " << opt.learning_rate(step) << "); parameter norms:" << describe(params);
        throw TrainingError(os.str());
      }
      g.backward(loss);
      const double lr = opt.step();
      log.rows.push_back({step, epoch, value, lr});
      if (on_step) on_step(log.rows.back());
      ++step;
    }
  }
  return log;
}

}  // namespace

TrainLog train_classifier(ClassifierModel& model, const ImageSet& data, const TrainConfig& cfg,
                          const StepCallback& on_step) {
  if (data.labels.size() != data.size()) {
    throw std::invalid_argument("train_classifier: labels missing or miscounted");
  }
  return run("train_classifier", model.parameters(), data, cfg, on_step,
             [&](Graph& g, std::span<const std::size_t> idx, std::size_t) {
               const auto labels = data.gather_labels(idx);
               return ad::cross_entropy(g, model.logits(g, data.gather(idx)), labels);
             });
}

TrainLog train_mae(MaeModel& model, const ImageSet& data, const TrainConfig& cfg,
                   const StepCallback& on_step) {
  const auto& mc = model.config();
  return run("train_mae", model.parameters(), data, cfg, on_step,
             [&](Graph& g, std::span<const std::size_t> idx, std::size_t step) {
               std::vector<MaskPattern> masks;
               masks.reserve(idx.size());
               for (auto i : idx) {
                 auto rng = stream(cfg.seed, step + 1, i);
                 masks.push_back(sample_mask(mc.grid, mc.mask_ratio, rng));
               }
               return mae_loss(g, data.gather(idx), masks, model);
             });
}

}  // namespace maeguard::models
