#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "mtseq/tensor.hpp"

namespace mtseq {

class Tape;

using NodeId = std::uint32_t;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

// Per-example record of primitive operations. Nodes are appended in
// evaluation order, so the node list is already topologically sorted and the
// backward sweep is a single reverse scan.
//
// Parameters enter the tape by reference: their values are not copied and
// their gradients accumulate directly into the parameter tensor.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor& param);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  // Gradient buffer of a node, allocated (zeroed) on first use.
  std::span<double> grad(NodeId id);
  bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates to every ancestor.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    Tensor* external = nullptr;
    BackwardFn backward;
    bool needs_grad = false;
  };

  Tensor& tensor(NodeId id) {
    auto& n = nodes_[id];
    return n.external ? *n.external : n.owned;
  }

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, NodeId> param_nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace mtseq
