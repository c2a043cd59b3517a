#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "styleforge/tensor.hpp"

namespace styleforge {

/// One value in the computation graph. Leaves are parameters or constants;
/// interior nodes carry the closure that pushes their gradient to inputs.
struct Node {
  Tensor value;
  Tensor grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Gradient storage, zero-initialized on first use.
  Tensor& grad_buffer();
  Node& input(std::size_t i) { return *inputs[i]; }
};

/// Shared handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  void zero_grad() { node_->grad = Tensor(); }

  /// Scalar value of a one-element tensor.
  real item() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds an interior node. The closure is dropped (and the node becomes a
/// constant) when no input needs a gradient or recording is disabled.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Reverse-mode sweep from a one-element root. Gradients accumulate into
/// every reachable node with requires_grad; the graph closures are released.
void backward(const Var& root);

/// Same value, no history.
Var detach(const Var& v);
Var constant(Tensor value);

}  // namespace styleforge
