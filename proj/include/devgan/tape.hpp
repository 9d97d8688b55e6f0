#pragma once

// Define-by-run reverse-mode differentiation.
//
// A Tape owns every value computed during one training step. Ops append a node
// holding the forward value, the input node ids, and a gradient rule. Nothing
// is cached between steps: each step builds a fresh tape.
//
// backward() is scoped: gradients flow only along paths that reach one of the
// listed parameters, and only those parameters appear in the result. The
// forward record is left intact so one tape can serve several scoped passes.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "devgan/optim.hpp"
#include "devgan/tensor.hpp"

namespace devgan {

using NodeId = std::uint32_t;

class Tape;

/// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  NodeId id() const { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

struct BackwardContext {
  const Tape& tape;
  std::span<const NodeId> inputs;
  const Tensor& output;
  const Tensor& grad_output;
  /// Zero-initialized accumulators, null where no gradient is wanted. Rules
  /// must add into these, never overwrite.
  std::span<Tensor* const> grad_inputs;

  const Tensor& input(std::size_t i) const;
  Tensor* grad(std::size_t i) const { return grad_inputs[i]; }
};

using BackwardRule = std::function<void(const BackwardContext&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value that never receives a gradient.
  Var constant(Tensor value);

  /// Snapshot of a parameter's current value. Repeated calls between two
  /// optimizer steps return the same node.
  Var param(ParamTensor& p);

  /// Appends an op result. Throws ErrorCode::non_finite if `value` contains
  /// NaN or Inf.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardRule rule);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::string_view op(NodeId id) const { return nodes_[id].op; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_[id].inputs; }
  /// Parameter behind a param() leaf, or null.
  const ParamTensor* param_of(NodeId id) const { return nodes_[id].param; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of scalar `root` with respect to each listed parameter, keyed
  /// by parameter name. Unreachable parameters get a zero tensor.
  GradientMap backward(Var root, std::span<ParamTensor* const> params) const;

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardRule rule;
    ParamTensor* param = nullptr;
  };

  NodeId push(Node node);

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamTensor*, std::uint64_t>, NodeId> param_leaves_;
};

}  // namespace devgan
