#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "segadv/error.hpp"
#include "segadv/tensor/tensor.hpp"

namespace segadv {

template <typename T>
class BasicTape;

// Handle to a node recorded on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;
  BasicVar(BasicTape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  BasicTape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const BasicTensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  // d(root)/d(this) after the last backward; zeros when unreached.
  BasicTensor<T> grad() const { return tape_->grad(id_); }

 private:
  BasicTape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run reverse-mode tape. Single-threaded; build one per forward pass.
template <typename T>
class BasicTape {
 public:
  using Var = BasicVar<T>;
  // Receives the node's own output and the gradient flowing into it; must add
  // into the gradient buffers of those inputs that require grad.
  using BackwardFn = std::function<void(BasicTape&, const BasicTensor<T>&, std::span<const T>)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  Var leaf(BasicTensor<T> value) { return push("leaf", std::move(value), true, {}); }
  Var constant(BasicTensor<T> value) { return push("constant", std::move(value), false, {}); }

  // Records an op output. The node requires grad iff any input does; the
  // backward rule is dropped otherwise.
  Var record(std::string op, BasicTensor<T> value, const std::vector<std::size_t>& inputs, BackwardFn backward) {
    bool needs = false;
    for (std::size_t in : inputs) {
      if (in >= nodes_.size()) throw UsageError(op + ": input node " + std::to_string(in) + " not on this tape");
      needs = needs || nodes_[in].requires_grad;
    }
    Var out = push(std::move(op), std::move(value), needs, inputs);
    if (needs) nodes_.back().backward = std::move(backward);
    return out;
  }

  void backward(Var root) {
    if (&root.tape() != this) throw UsageError("backward: root belongs to another tape");
    const auto& rv = value(root.id());
    if (rv.numel() != 1 || rv.rank() > 1) {
      throw UsageError("backward: root must be scalar, got shape " + shape_str(rv.shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    if (!nodes_[root.id()].requires_grad) return;
    grad_buffer(root.id())[0] = T(1);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      // Inputs always have smaller ids, so the rule never touches n.grad.
      n.backward(*this, n.value, std::span<const T>(n.grad));
    }
  }

  const BasicTensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_.at(id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  BasicTensor<T> grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.empty()) return BasicTensor<T>(n.value.shape());
    return BasicTensor<T>(n.value.shape(), n.grad);
  }

  // Zero-initialised on first access. Backward rules accumulate into this.
  std::vector<T>& grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad.assign(n.value.numel(), T(0));
    return n.grad;
  }

 private:
  struct Node {
    std::string op;
    BasicTensor<T> value;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    std::vector<T> grad;
    BackwardFn backward;
  };

  Var push(std::string op, BasicTensor<T> value, bool requires_grad, const std::vector<std::size_t>& inputs) {
    nodes_.push_back(Node{std::move(op), std::move(value), requires_grad, inputs, {}, {}});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

using Tape = BasicTape<float>;
using Var = BasicVar<float>;
using Tape64 = BasicTape<double>;
using Var64 = BasicVar<double>;

}  // namespace segadv
