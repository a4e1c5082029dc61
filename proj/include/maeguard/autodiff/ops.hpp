#pragma once

// Differentiable operators. Every op takes the graph it records into; when no
// operand is tracked by that graph the op only computes its value.
//
// Broadcasting is limited to the bias pattern of `add`: the right operand may
// have a shape equal to a trailing suffix of the left operand's shape.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "maeguard/autodiff/graph.hpp"
#include "maeguard/autodiff/tensor.hpp"

namespace maeguard::ad {

inline constexpr double kLayerNormEps = 1e-5;

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& a, double factor);

// (m,k) x (k,n) -> (m,n)
// (..., k) x (k,n) -> (..., n)      for a of rank >= 3 and b of rank 2
// (B,m,k) x (B,k,n) -> (B,m,n)      batched, both of rank 3
Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

// Generic axis permutation: out.shape[i] = a.shape[perm[i]].
Tensor transpose(Graph& g, const Tensor& a, const std::vector<std::size_t>& perm);
// Swaps the last two axes.
Tensor transpose(Graph& g, const Tensor& a);
Tensor reshape(Graph& g, const Tensor& a, Shape shape);
Tensor slice(Graph& g, const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t length);

// Treats `a` as rows along axis 0 and picks rows by index (repeats allowed).
Tensor gather_rows(Graph& g, const Tensor& a, std::span<const std::size_t> rows);
// Concatenates along axis 0; trailing dimensions must agree.
Tensor concat_rows(Graph& g, const std::vector<Tensor>& parts);

Tensor softmax(Graph& g, const Tensor& a);
Tensor gelu(Graph& g, const Tensor& a);
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

// Elementwise select: out[i] = mask[i] ? a[i] : b[i].
Tensor where(Graph& g, std::span<const std::uint8_t> mask, const Tensor& a,
             const Tensor& b);

Tensor sum(Graph& g, const Tensor& a);
// Scalar mean((a - b)^2).
Tensor mse(Graph& g, const Tensor& a, const Tensor& b);

enum class Reduction { kMean, kSum };
// logits (B,K), one label per row.
Tensor cross_entropy(Graph& g, const Tensor& logits, std::span<const int> labels,
                     Reduction reduction = Reduction::kMean);

}  // namespace maeguard::ad
