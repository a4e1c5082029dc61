#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "maeguard/autodiff/tensor.hpp"

namespace maeguard::ad {

// Which leaves a graph differentiates with respect to.
enum class GradScope {
  kNone,        // inference only; nothing is recorded
  kInputsOnly,  // leaves with requires_grad, except parameters
  kAll,         // every leaf with requires_grad
};

// Per-evaluation record of operations. Nodes are appended as ops execute, so
// insertion order is a topological order; backward walks it in reverse.
// A graph supports exactly one backward pass.
class Graph {
 public:
  // Receives the gradient of the node output and one span per input. A span
  // is empty when that input does not need a gradient; otherwise the
  // function must add (never assign) its contribution.
  using BackwardFn =
      std::function<void(std::span<const double> grad_out,
                         std::span<const std::span<double>> grad_in)>;

  explicit Graph(GradScope scope = GradScope::kAll);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  GradScope scope() const { return scope_; }

  // True if gradients flow into `t` in this graph.
  bool tracks(const Tensor& t) const;

  // Produces the op output. A node is recorded only if some input is tracked.
  Tensor record(std::string_view op, Shape shape, std::vector<double> values,
                std::vector<Tensor> inputs, BackwardFn backward);

  // Accumulates dLoss/dLeaf into every tracked leaf's grad buffer.
  void backward(const Tensor& loss);

  // Returns dLoss/dInput without touching any leaf's grad buffer.
  Tensor gradient(const Tensor& loss, const Tensor& input);

  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(std::size_t node) const { return nodes_.at(node).op; }

 private:
  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    BackwardFn backward;
    std::size_t numel = 0;
  };

  bool owns(const Tensor& t) const;
  void run_backward(const Tensor& loss);

  GradScope scope_;
  std::uint64_t id_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::vector<Tensor> leaves_;
  std::unordered_map<const TensorImpl*, std::size_t> leaf_index_;
  std::vector<std::vector<double>> node_grads_;
  std::vector<std::vector<double>> leaf_grads_;
};

}  // namespace maeguard::ad
