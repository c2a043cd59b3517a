#include "styleforge/autograd.hpp"

#include <stdexcept>
#include <unordered_set>

namespace styleforge {

namespace {
thread_local bool g_grad_enabled = true;
}

Tensor& Node::grad_buffer() {
  if (grad.empty() && value.size() > 0) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

real Var::item() const {
  if (value().size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + shape_string(shape()));
  }
  return value()[0];
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& v : inputs) needs = needs || v.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& v : inputs) node->inputs.push_back(v.ptr());
    node->backward = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw std::invalid_argument("backward() needs a one-element root");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reverse of it is a valid topological order.
  // The order holds owning handles because releasing a parent's links can
  // drop the last reference to a child that is still pending.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root.ptr(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      std::shared_ptr<Node> child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    if (node->backward && !node->grad.empty()) node->backward(*node);
    if (node->backward) {
      // Interior node: release saved tensors and links.
      node->backward = nullptr;
      node->inputs.clear();
      if (node != root.node()) node->grad = Tensor();
    }
  }
}

Var detach(const Var& v) { return Var(v.value(), false); }

Var constant(Tensor value) { return Var(std::move(value), false); }

}  // namespace styleforge
