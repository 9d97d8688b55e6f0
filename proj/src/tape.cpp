#include "devgan/tape.hpp"

#include <optional>
#include <unordered_set>

#include "devgan/error.hpp"

namespace devgan {

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& BackwardContext::input(std::size_t i) const { return tape.value(inputs[i]); }

NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  return {this, push(Node{"constant", std::move(value), {}, nullptr, nullptr})};
}

Var Tape::param(ParamTensor& p) {
  const auto key = std::make_pair(static_cast<const ParamTensor*>(&p), p.step_count);
  if (const auto it = param_leaves_.find(key); it != param_leaves_.end()) {
    return {this, it->second};
  }
  const NodeId id = push(Node{"param", p.value, {}, nullptr, &p});
  param_leaves_.emplace(key, id);
  return {this, id};
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardRule rule) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::non_finite, "op '" + std::string(op) + "' produced a non-finite value");
  }
  Node node{std::string(op), std::move(value), {}, std::move(rule), nullptr};
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (&v.tape() != this) {
      throw Error(ErrorCode::invalid_argument, "op '" + std::string(op) + "' mixes tapes");
    }
    node.inputs.push_back(v.id());
  }
  return {this, push(std::move(node))};
}

GradientMap Tape::backward(Var root, std::span<ParamTensor* const> params) const {
  if (root.value().size() != 1) {
    throw Error(ErrorCode::shape_mismatch,
                "backward() root must be scalar, got shape " + shape_str(root.shape()));
  }
  const NodeId root_id = root.id();
  const std::unordered_set<const ParamTensor*> scope(params.begin(), params.end());

  // needs_grad[i]: node i depends on a scoped parameter.
  std::vector<char> needs_grad(root_id + 1, 0);
  for (NodeId i = 0; i <= root_id; ++i) {
    const Node& n = nodes_[i];
    if (n.param != nullptr) {
      needs_grad[i] = scope.contains(n.param) ? 1 : 0;
      continue;
    }
    for (NodeId in : n.inputs) {
      if (needs_grad[in]) {
        needs_grad[i] = 1;
        break;
      }
    }
  }

  std::vector<std::optional<Tensor>> grads(root_id + 1);
  if (needs_grad[root_id]) grads[root_id].emplace(root.shape(), 1.0);

  std::vector<Tensor*> grad_inputs;
  for (NodeId i = root_id + 1; i-- > 0;) {
    if (!grads[i] || !nodes_[i].rule) continue;
    const Node& n = nodes_[i];
    grad_inputs.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const NodeId in = n.inputs[k];
      if (!needs_grad[in]) continue;
      if (!grads[in]) grads[in].emplace(nodes_[in].value.shape(), 0.0);
      grad_inputs[k] = &*grads[in];
    }
    n.rule(BackwardContext{*this, n.inputs, n.value, *grads[i], grad_inputs});
    grads[i].reset();
  }

  GradientMap out;
  for (ParamTensor* p : params) out.insert_or_assign(p->name, Tensor(p->value.shape(), 0.0));
  for (NodeId i = 0; i <= root_id; ++i) {
    if (nodes_[i].param == nullptr || !grads[i]) continue;
    Tensor& acc = out.at(nodes_[i].param->name);
    const Tensor& g = *grads[i];
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
  }
  return out;
}

}  // namespace devgan
