#include "mtseq/tape.hpp"

#include "mtseq/errors.hpp"

namespace mtseq {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, false});
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::parameter(Tensor& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) return {this, it->second};
  nodes_.push_back(Node{Tensor{}, &param, {}, true});
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  param_nodes_.emplace(&param, id);
  return {this, id};
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw ContractError("operands recorded on different tapes");
    needs = needs || nodes_[in.id()].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), nullptr, needs ? std::move(backward) : BackwardFn{}, needs});
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

const Tensor& Tape::value(NodeId id) const {
  const auto& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

std::span<double> Tape::grad(NodeId id) { return tensor(id).grad(); }

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  const auto& lv = value(loss.id());
  if (lv.size() != 1)
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(lv.shape()));
  grad(loss.id())[0] += 1.0;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.backward || n.external) continue;
    if (!n.owned.has_grad()) continue;
    n.backward(*this, id);
  }
}

}  // namespace mtseq
