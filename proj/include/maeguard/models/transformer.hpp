#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "maeguard/autodiff/graph.hpp"
#include "maeguard/autodiff/tensor.hpp"

namespace maeguard::models {

using ad::Graph;
using ad::Tensor;

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

std::size_t parameter_count(const ParamList& params);

// Gaussian init scaled by 1/sqrt(fan_in); biases start at zero.
struct Linear {
  Tensor weight;  // (in, out)
  Tensor bias;    // (out)

  static Linear create(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor operator()(Graph& g, const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm create(std::size_t dim);
  Tensor operator()(Graph& g, const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

// Pre-norm block: x + MSA(LN(x)), then x + MLP(LN(x)).
struct TransformerBlock {
  std::size_t dim = 0;
  std::size_t heads = 1;
  LayerNorm norm1;
  Linear qkv;
  Linear proj;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;

  static TransformerBlock create(std::size_t dim, std::size_t heads, std::size_t hidden,
                                 std::mt19937_64& rng);
  // x: (B, T, dim)
  Tensor operator()(Graph& g, const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

Tensor attention(Graph& g, const Tensor& x, const Linear& qkv, const Linear& proj,
                 std::size_t heads);

Tensor random_parameter(ad::Shape shape, double stddev, std::mt19937_64& rng);

}  // namespace maeguard::models
