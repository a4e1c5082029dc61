#include "maeguard/models/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "maeguard/autodiff/ops.hpp"

namespace maeguard::models {

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Tensor random_parameter(ad::Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> data(ad::numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(data));
}

Linear Linear::create(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {random_parameter({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng),
          Tensor::parameter({out}, std::vector<double>(out, 0.0))};
}

Tensor Linear::operator()(Graph& g, const Tensor& x) const {
  return ad::add(g, ad::matmul(g, x, weight), bias);
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::create(std::size_t dim) {
  return {Tensor::parameter({dim}, std::vector<double>(dim, 1.0)),
          Tensor::parameter({dim}, std::vector<double>(dim, 0.0))};
}

Tensor LayerNorm::operator()(Graph& g, const Tensor& x) const {
  return ad::layer_norm(g, x, gamma, beta);
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Tensor attention(Graph& g, const Tensor& x, const Linear& qkv, const Linear& proj,
                 std::size_t heads) {
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("attention: dim " + std::to_string(d) +
                                " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  auto z = qkv(g, x);                                  // (B,T,3D)
  z = ad::reshape(g, z, {b, t, 3, heads, dh});
  z = ad::transpose(g, z, {2, 0, 3, 1, 4});            // (3,B,H,T,dh)
  z = ad::reshape(g, z, {3, b * heads, t, dh});
  auto q = ad::reshape(g, ad::slice(g, z, 0, 0, 1), {b * heads, t, dh});
  auto k = ad::reshape(g, ad::slice(g, z, 0, 1, 1), {b * heads, t, dh});
  auto v = ad::reshape(g, ad::slice(g, z, 0, 2, 1), {b * heads, t, dh});
  auto scores = ad::scale(g, ad::matmul(g, q, ad::transpose(g, k)),
                          1.0 / std::sqrt(static_cast<double>(dh)));
  auto out = ad::matmul(g, ad::softmax(g, scores), v);  // (B*H,T,dh)
  out = ad::reshape(g, out, {b, heads, t, dh});
  out = ad::transpose(g, out, {0, 2, 1, 3});
  out = ad::reshape(g, out, {b, t, d});
  return proj(g, out);
}

TransformerBlock TransformerBlock::create(std::size_t dim, std::size_t heads, std::size_t hidden,
                                          std::mt19937_64& rng) {
  TransformerBlock blk;
  blk.dim = dim;
  blk.heads = heads;
  blk.norm1 = LayerNorm::create(dim);
  blk.qkv = Linear::create(dim, 3 * dim, rng);
  blk.proj = Linear::create(dim, dim, rng);
  blk.norm2 = LayerNorm::create(dim);
  blk.fc1 = Linear::create(dim, hidden, rng);
  blk.fc2 = Linear::create(hidden, dim, rng);
  return blk;
}

Tensor TransformerBlock::operator()(Graph& g, const Tensor& x) const {
  auto h = ad::add(g, x, attention(g, norm1(g, x), qkv, proj, heads));
  auto m = fc2(g, ad::gelu(g, fc1(g, norm2(g, h))));
  return ad::add(g, h, m);
}

void TransformerBlock::collect(const std::string& prefix, ParamList& out) const {
  norm1.collect(prefix + ".norm1", out);
  qkv.collect(prefix + ".qkv", out);
  proj.collect(prefix + ".proj", out);
  norm2.collect(prefix + ".norm2", out);
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

}  // namespace maeguard::models
