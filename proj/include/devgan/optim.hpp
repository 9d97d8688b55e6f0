#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "devgan/tensor.hpp"

namespace devgan {

/// Trainable tensor with its Adam state.
struct ParamTensor {
  ParamTensor() = default;
  ParamTensor(std::string name, Tensor value);

  std::string name;
  Tensor value;
  std::vector<double> moment1;
  std::vector<double> moment2;
  std::uint64_t step_count = 0;
};

/// Parameter name -> gradient with the parameter's shape.
using GradientMap = std::map<std::string, Tensor>;

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// One bias-corrected Adam update. A parameter absent from `grads` is updated
/// with a zero gradient, which leaves its value unchanged.
void adam_step(std::span<ParamTensor* const> params, const GradientMap& grads,
               const AdamConfig& cfg);

}  // namespace devgan
