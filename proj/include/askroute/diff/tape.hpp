#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "askroute/diff/tensor.hpp"

namespace askroute::diff {

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Shape& shape() const { return tape->shape(*this); }
  std::size_t size() const { return tape->value(*this).size(); }
  std::span<const T> value() const { return tape->value(*this); }
  T item() const {
    auto v = value();
    if (v.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return v[0];
  }
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dynamic reverse-mode tape. Ops append nodes in execution order, which is a
/// topological order, so backward is a single reverse sweep. A tape supports
/// exactly one backward pass.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that reads the tensor's storage in place; gradients land on the tape.
  Var<T> param(const Tensor<T>& tensor) {
    Node node;
    node.shape = tensor.shape();
    node.external = tensor.values().data();
    node.size = tensor.size();
    node.needs_grad = true;
    return push(std::move(node));
  }

  Var<T> variable(Shape shape, std::vector<T> values) {
    return leaf(std::move(shape), std::move(values), true);
  }

  Var<T> constant(Shape shape, std::vector<T> values) {
    return leaf(std::move(shape), std::move(values), false);
  }

  Var<T> constant(const Tensor<T>& t) {
    return constant(t.shape(), std::vector<T>(t.values().begin(), t.values().end()));
  }

  Var<T> scalar(T v) { return constant(Shape{}, {v}); }

  /// Records the result of an op. `backward` receives the tape and the id of
  /// the new node and must accumulate into its inputs via grad_of().
  Var<T> record(Shape shape, std::vector<T> values, bool needs_grad, BackwardFn backward) {
    if (numel(shape) != values.size()) {
      throw ShapeError("record: value count does not match " + shape_string(shape));
    }
    if (backward_done_) throw TapeError("tape: cannot record after backward");
    Node node;
    node.shape = std::move(shape);
    node.owned = std::move(values);
    node.size = node.owned.size();
    node.needs_grad = needs_grad;
    if (needs_grad) node.backward = std::move(backward);
    return push(std::move(node));
  }

  const Shape& shape(Var<T> v) const { return nodes_.at(v.id).shape; }

  std::span<const T> value(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    return {n.data(), n.size};
  }

  bool needs_grad(Var<T> v) const { return nodes_.at(v.id).needs_grad; }

  /// Mutable gradient buffer of a node, allocated on first use.
  std::span<T> grad_of(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.size, T{0});
    return n.grad;
  }

  std::span<const T> value_of(std::uint32_t id) const {
    const Node& n = nodes_[id];
    return {n.data(), n.size};
  }

  /// Gradient accumulated for `v` by backward(); all zeros if it was unreachable.
  std::vector<T> grad(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return std::vector<T>(n.size, T{0});
    return n.grad;
  }

  void backward(Var<T> loss) {
    if (backward_done_) throw TapeError("tape: backward already ran on this tape");
    if (value(loss).size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + shape_string(shape(loss)));
    }
    backward_done_ = true;
    grad_of(loss.id)[0] = T{1};
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    Shape shape;
    std::vector<T> owned;
    const T* external = nullptr;
    std::size_t size = 0;
    std::vector<T> grad;
    bool needs_grad = false;
    BackwardFn backward;

    const T* data() const { return external ? external : owned.data(); }
  };

  Var<T> leaf(Shape shape, std::vector<T> values, bool needs_grad) {
    if (numel(shape) != values.size()) {
      throw ShapeError("leaf: value count does not match " + shape_string(shape));
    }
    Node node;
    node.shape = std::move(shape);
    node.owned = std::move(values);
    node.size = node.owned.size();
    node.needs_grad = needs_grad;
    return push(std::move(node));
  }

  Var<T> push(Node node) {
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace askroute::diff
