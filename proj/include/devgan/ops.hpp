#pragma once

// Differentiable kernels. Every function records its result on the tape of
// its first argument and throws devgan::Error on shape mismatches.

#include <cstddef>
#include <cstdint>

#include "devgan/tape.hpp"

namespace devgan::ops {

/// input [N,Cin,H,W], weight [Cout,Cin,kH,kW], bias [Cout]; zero padding.
Var conv2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t pad);

/// input [N,Cin,H,W], weight [Cin,Cout,kH,kW], bias [Cout].
/// H' = (H-1)*stride - 2*pad + kH + output_pad, with output_pad < stride.
Var conv_transpose2d(Var input, Var weight, Var bias, std::size_t stride, std::size_t pad,
                     std::size_t output_pad = 0);

/// Per-(sample, channel) normalization over H x W with affine gamma/beta [C].
Var instance_norm(Var input, Var gamma, Var beta, double eps = 1e-5);

enum class ActivationKind { relu, leaky_relu, tanh };

struct Activation {
  ActivationKind kind = ActivationKind::relu;
  double slope = 0.2;
};

Var activation(Var input, Activation act);
Var relu(Var input);
Var leaky_relu(Var input, double slope = 0.2);
Var tanh(Var input);

Var add(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var input);
/// <input, weights> for a constant weight tensor of the same shape.
Var weighted_sum(Var input, const Tensor& weights);

/// mean |a - b|; the subgradient at a == b is 0.
Var l1_loss(Var a, Var b);
/// mean (a - b)^2
Var mse_loss(Var a, Var b);
/// mean binary cross-entropy of sigmoid(logits) against a constant target.
Var bce_with_logits(Var logits, double target);

/// Copy of the value with no path back to its inputs.
Var detach(Var input);
/// Constant tensor of `input`'s shape filled with `value`.
Var full_like(Var input, double value);

/// Multiply-accumulates executed by forward conv2d/conv_transpose2d calls in
/// this process (backward passes excluded).
std::uint64_t forward_conv_macs();
void reset_forward_conv_macs();

}  // namespace devgan::ops
