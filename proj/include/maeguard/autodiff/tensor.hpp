#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maeguard::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Raised for operand shape violations. The message names the operator and
// the offending shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Graph;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // leaf gradient; empty until a backward pass writes it
  bool requires_grad = false;
  bool parameter = false;
  std::uint64_t graph_id = 0;  // nonzero for tensors produced by a recording op
  std::size_t node = 0;
};

// Shared handle to a dense row-major array of doubles. Copies alias the same
// storage; use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // Trainable leaf. Parameters are treated as constants by graphs that only
  // differentiate with respect to inputs.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> values() const { return impl_->data; }
  std::span<double> mutable_values() { return impl_->data; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool is_parameter() const { return impl_->parameter; }
  bool is_leaf() const { return impl_->graph_id == 0; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  // Independent constant copy (no grad, not a parameter).
  Tensor clone() const;

  bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  friend class Graph;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

}  // namespace maeguard::ad
