#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "abya/autodiff/tensor.hpp"

namespace abya::ad {

/// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kNone;

  bool valid() const { return id != kNone; }
  friend bool operator==(Var a, Var b) { return a.id == b.id; }
};

/// A NaN or infinity showed up in a forward value or in a gradient.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& phase, const char* op, std::uint32_t node)
      : std::runtime_error(phase + " of node #" + std::to_string(node) + " (" + op +
                           ") is not finite"),
        op_(op),
        node_(node) {}

  const char* op() const { return op_; }
  std::uint32_t node() const { return node_; }

 private:
  const char* op_;
  std::uint32_t node_;
};

/// Reverse-mode recording of one computation. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order for the
/// backward sweep. A tape lives for one episode and is then discarded.
template <typename T>
class Tape {
 public:
  /// Receives the finished output gradient of the node and must accumulate into
  /// the gradients of its parents (via Tape::accumulate).
  using Backward = std::function<void(Tape&, std::span<const T> out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  Var constant(Tensor<T> value, const char* op = "constant") {
    return push(op, std::move(value), false, {});
  }

  /// Leaf that collects a gradient.
  Var variable(Tensor<T> value, const char* op = "variable") {
    return push(op, std::move(value), true, {});
  }

  /// Appends an interior node. It requires a gradient iff any parent does; when
  /// none does the backward closure is dropped.
  Var record(const char* op, Tensor<T> value, std::initializer_list<Var> parents,
             Backward backward) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
    return push(op, std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  template <typename Range>
  Var record_many(const char* op, Tensor<T> value, const Range& parents, Backward backward) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
    return push(op, std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  const Shape& dims(Var v) const { return nodes_.at(v.id).value.dims(); }
  const char* op(Var v) const { return nodes_.at(v.id).op; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulated gradient of a node; empty until backward() reached it.
  std::span<const T> grad(Var v) const { return nodes_.at(v.id).grad; }

  /// Mutable gradient buffer of a parent, allocated on first touch. Returns an
  /// empty span for nodes that do not require a gradient.
  std::span<T> accumulate(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return {};
    if (n.grad.empty()) n.grad.assign(n.value.size(), T{0});
    return n.grad;
  }

  /// Runs the backward sweep from a scalar node.
  void backward(Var loss) {
    const Node& root = nodes_.at(loss.id);
    if (root.value.size() != 1) {
      throw DimensionError("backward: loss must be a scalar, got shape " +
                           to_string(root.value.dims()));
    }
    for (Node& n : nodes_) n.grad.clear();
    if (!root.requires_grad) return;
    nodes_[loss.id].grad.assign(1, T{1});
    for (std::uint32_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (check_finite_) {
        for (T g : n.grad) {
          if (!std::isfinite(g)) throw NonFiniteError("gradient", n.op, i);
        }
      }
      // Parents always have smaller ids, so the closure never writes n.grad.
      if (n.backward) n.backward(*this, std::span<const T>(n.grad));
    }
  }

  void set_check_finite(bool on) { check_finite_ = on; }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    const char* op;
    Tensor<T> value;
    std::vector<T> grad;
    Backward backward;
    bool requires_grad;
  };

  Var push(const char* op, Tensor<T> value, bool requires_grad, Backward backward) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    if (check_finite_) {
      for (T x : value.data()) {
        if (!std::isfinite(x)) throw NonFiniteError("value", op, id);
      }
    }
    nodes_.push_back(Node{op, std::move(value), {}, std::move(backward), requires_grad});
    return Var{id};
  }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
};

}  // namespace abya::ad
