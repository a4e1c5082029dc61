#include "maeguard/autodiff/graph.hpp"

#include <atomic>
#include <stdexcept>

namespace maeguard::ad {
namespace {

std::uint64_t next_graph_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace

Graph::Graph(GradScope scope) : scope_(scope), id_(next_graph_id()) {}

bool Graph::owns(const Tensor& t) const {
  return t.defined() && t.impl_->graph_id == id_;
}

bool Graph::tracks(const Tensor& t) const {
  if (!t.defined() || scope_ == GradScope::kNone) return false;
  if (owns(t)) return true;
  if (!t.is_leaf() || !t.requires_grad()) return false;
  return scope_ == GradScope::kAll || !t.is_parameter();
}

Tensor Graph::record(std::string_view op, Shape shape, std::vector<double> values,
                     std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out(std::move(shape), std::move(values));
  bool any = false;
  for (const auto& in : inputs) any = any || tracks(in);
  if (!any) return out;
  if (consumed_) {
    throw std::logic_error(std::string(op) + ": graph already ran its backward pass");
  }
  for (const auto& in : inputs) {
    if (tracks(in) && !owns(in) && !leaf_index_.contains(in.impl_.get())) {
      leaf_index_.emplace(in.impl_.get(), leaves_.size());
      leaves_.push_back(in);
    }
  }
  out.impl_->requires_grad = true;
  out.impl_->graph_id = id_;
  out.impl_->node = nodes_.size();
  nodes_.push_back(Node{std::string(op), std::move(inputs), std::move(backward), out.numel()});
  return out;
}

void Graph::run_backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("backward: graph already ran its backward pass");
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (nodes_.empty() || !owns(loss)) {
    throw std::logic_error("backward: loss was not produced by this graph");
  }
  consumed_ = true;

  node_grads_.assign(nodes_.size(), {});
  leaf_grads_.assign(leaves_.size(), {});
  node_grads_[loss.impl_->node].assign(1, 1.0);

  std::vector<std::span<double>> grad_in;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (node_grads_[i].empty()) continue;
    Node& node = nodes_[i];
    grad_in.assign(node.inputs.size(), {});
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const Tensor& in = node.inputs[j];
      if (!tracks(in)) continue;
      std::vector<double>* buf = nullptr;
      if (owns(in)) {
        buf = &node_grads_[in.impl_->node];
      } else {
        buf = &leaf_grads_[leaf_index_.at(in.impl_.get())];
      }
      if (buf->empty()) buf->assign(in.numel(), 0.0);
      grad_in[j] = *buf;
    }
    node.backward(node_grads_[i], grad_in);
    node_grads_[i] = {};
    node.backward = nullptr;
  }
}

void Graph::backward(const Tensor& loss) {
  run_backward(loss);
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    auto& target = leaves_[i].impl_->grad;
    const auto& g = leaf_grads_[i];
    if (target.empty()) target.assign(leaves_[i].numel(), 0.0);
    if (g.empty()) continue;
    for (std::size_t k = 0; k < g.size(); ++k) target[k] += g[k];
  }
  leaf_grads_.clear();
}

Tensor Graph::gradient(const Tensor& loss, const Tensor& input) {
  if (!input.defined() || !leaf_index_.contains(input.impl_.get())) {
    throw std::logic_error("gradient: input did not participate in the graph with requires_grad");
  }
  const std::size_t idx = leaf_index_.at(input.impl_.get());
  run_backward(loss);
  std::vector<double> g = std::move(leaf_grads_[idx]);
  if (g.empty()) g.assign(input.numel(), 0.0);
  leaf_grads_.clear();
  return Tensor(input.shape(), std::move(g));
}

}  // namespace maeguard::ad
