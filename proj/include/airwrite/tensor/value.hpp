#pragma once

// Reverse-mode automatic differentiation over small dense f64 tensors.
//
// A Value is a shared handle to a graph node. Operations build new nodes that
// keep their parents alive and record a local gradient rule; backward() walks
// the graph once in reverse topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "airwrite/error.hpp"

namespace airwrite {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

enum class Mode { train, eval };

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const Node&)> backward_fn;
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Value {
 public:
  Value() = default;

  static Value constant(Shape shape, std::vector<double> data) {
    return Value(make_leaf(std::move(shape), std::move(data), false));
  }

  static Value zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> data(shape_size(shape), 0.0);
    return Value(make_leaf(std::move(shape), std::move(data), requires_grad));
  }

  static Value parameter(Shape shape, std::vector<double> data) {
    return Value(make_leaf(std::move(shape), std::move(data), true));
  }

  static Value scalar(double x, bool requires_grad = false) {
    return Value(make_leaf({1}, {x}, requires_grad));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }

  double item() const {
    if (size() != 1) throw Error(ErrorKind::invalid_shape, "item() on " + shape_string(shape()));
    return node_->data[0];
  }

  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  // Builds the result node of an operation. The backward rule is only kept
  // when recording is enabled and some parent needs a gradient.
  static Value from_op(Shape shape, std::vector<double> data, std::vector<Value> parents,
                       std::function<void(const detail::Node&)> backward_fn) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->is_leaf = false;
    bool needs = false;
    if (grad_enabled()) {
      for (const auto& p : parents) needs = needs || p.requires_grad();
    }
    if (needs) {
      node->requires_grad = true;
      node->grad.assign(node->data.size(), 0.0);
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node_);
      node->backward_fn = std::move(backward_fn);
    }
    return Value(std::move(node));
  }

 private:
  explicit Value(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  static std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> data,
                                                 bool requires_grad) {
    if (shape_size(shape) != data.size()) {
      throw Error(ErrorKind::invalid_shape, "data length " + std::to_string(data.size()) +
                                                " does not match shape " + shape_string(shape));
    }
    if (shape.size() > 3) throw Error(ErrorKind::invalid_shape, "rank > 3 is not supported");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->data.size(), 0.0);
    return node;
  }

  std::shared_ptr<detail::Node> node_;
};

/// Accumulates d(root)/d(leaf) into every reachable leaf that requires a
/// gradient. Intermediate gradients are reset on each call, so repeated calls
/// add up in the leaves only.
inline void backward(const Value& root) {
  if (!root.defined() || root.size() != 1) {
    throw Error(ErrorKind::invalid_root,
                "backward needs a scalar root, got " +
                    (root.defined() ? shape_string(root.shape()) : std::string("undefined")));
  }
  if (!root.requires_grad()) return;

  std::vector<detail::Node*> order;
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* node : order) {
    if (!node->is_leaf) std::fill(node->grad.begin(), node->grad.end(), 0.0);
  }
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

}  // namespace airwrite
