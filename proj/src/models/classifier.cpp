#include "maeguard/models/classifier.hpp"

#include <cmath>
#include <stdexcept>

#include "maeguard/autodiff/ops.hpp"

namespace maeguard::models {

Tensor sincos_positions(std::size_t rows, std::size_t cols, std::size_t dim) {
  if (dim % 4 != 0) throw std::invalid_argument("position table: dim must be a multiple of 4");
  const std::size_t quarter = dim / 4;
  std::vector<double> table(rows * cols * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double* row = &table[(r * cols + c) * dim];
      for (std::size_t i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        row[i] = std::sin(r * omega);
        row[quarter + i] = std::cos(r * omega);
        row[2 * quarter + i] = std::sin(c * omega);
        row[3 * quarter + i] = std::cos(c * omega);
      }
    }
  }
  return Tensor({rows * cols, dim}, std::move(table));
}

ClassifierModel::ClassifierModel(const ClassifierConfig& cfg) : cfg_(cfg) {
  cfg_.grid.validate();
  if (cfg_.classes == 0) throw std::invalid_argument("classifier: need at least one class");
  std::mt19937_64 rng(cfg_.seed);
  embed_ = Linear::create(cfg_.grid.patch_dim(), cfg_.embed_dim, rng);
  positions_ = sincos_positions(cfg_.grid.rows(), cfg_.grid.cols(), cfg_.embed_dim);
  for (std::size_t i = 0; i < cfg_.depth; ++i)
    blocks_.push_back(TransformerBlock::create(cfg_.embed_dim, cfg_.heads, cfg_.mlp_hidden, rng));
  norm_ = LayerNorm::create(cfg_.embed_dim);
  head_ = Linear::create(cfg_.embed_dim, cfg_.classes, rng);
}

Tensor ClassifierModel::logits(Graph& g, const Tensor& images) const {
  const std::size_t b = images.dim(0);
  const std::size_t t = cfg_.grid.n_patches(), d = cfg_.embed_dim;
  auto x = ad::add(g, embed_(g, patchify(g, images, cfg_.grid)), positions_);
  for (const auto& blk : blocks_) x = blk(g, x);
  Tensor pool({b, 1, t}, std::vector<double>(b * t, 1.0 / static_cast<double>(t)));
  auto pooled = ad::reshape(g, ad::matmul(g, pool, x), {b, d});
  return head_(g, norm_(g, pooled));
}

ParamList ClassifierModel::parameters() const {
  ParamList out;
  embed_.collect("embed", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect("blocks." + std::to_string(i), out);
  norm_.collect("norm", out);
  head_.collect("head", out);
  return out;
}

void ClassifierModel::zero_head() {
  for (auto* t : {&head_.weight, &head_.bias}) {
    auto v = t->mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

std::vector<double> classify(const ClassifierModel& model, const Tensor& image) {
  const auto& grid = model.config().grid;
  Graph g(ad::GradScope::kNone);
  auto batch = ad::reshape(g, image, {1, grid.height, grid.width, grid.channels});
  auto z = model.logits(g, batch);
  return {z.values().begin(), z.values().end()};
}

std::vector<int> predict(const ClassifierModel& model, const ImageSet& images,
                         std::size_t batch_size) {
  std::vector<int> out;
  out.reserve(images.size());
  const std::size_t k = model.config().classes;
  for (std::size_t first = 0; first < images.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, images.size() - first);
    Graph g(ad::GradScope::kNone);
    auto z = model.logits(g, images.batch(first, n));
    for (std::size_t i = 0; i < n; ++i) out.push_back(argmax(z.values().subspan(i * k, k)));
  }
  return out;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("accuracy: need equally sized, nonempty prediction/label lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace maeguard::models
