#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maeguard/models/data.hpp"
#include "maeguard/models/patch.hpp"
#include "maeguard/models/transformer.hpp"

namespace maeguard::models {

struct ClassifierConfig {
  PatchGrid grid{28, 28, 7, 1};
  std::size_t embed_dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t mlp_hidden = 128;
  std::size_t classes = 10;
  std::uint64_t seed = 1;

  bool operator==(const ClassifierConfig&) const = default;
};

// Fixed 2-D sine/cosine position table, (rows*cols, dim); dim must be a multiple of 4.
Tensor sincos_positions(std::size_t rows, std::size_t cols, std::size_t dim);

// Patch embedding + fixed positions, pre-norm blocks, mean pooling, linear head.
class ClassifierModel {
 public:
  explicit ClassifierModel(const ClassifierConfig& cfg);

  // images (B,H,W,C) -> logits (B,K)
  Tensor logits(Graph& g, const Tensor& images) const;

  const ClassifierConfig& config() const { return cfg_; }
  ParamList parameters() const;
  void zero_head();

 private:
  ClassifierConfig cfg_;
  Linear embed_;
  Tensor positions_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm norm_;
  Linear head_;
};

// Lowest index wins ties.
int argmax(std::span<const double> values);

// Logits of a single (H,W,C) image.
std::vector<double> classify(const ClassifierModel& model, const Tensor& image);

std::vector<int> predict(const ClassifierModel& model, const ImageSet& images,
                         std::size_t batch_size = 64);
double accuracy(std::span<const int> predictions, std::span<const int> labels);

}  // namespace maeguard::models
