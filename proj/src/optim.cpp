#include "devgan/optim.hpp"

#include <cmath>

#include "devgan/error.hpp"

namespace devgan {

ParamTensor::ParamTensor(std::string name_, Tensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      moment1(value.size(), 0.0),
      moment2(value.size(), 0.0) {}

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw Error(ErrorCode::config_value, "optimizer.lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::config_value, "optimizer betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::config_value, "optimizer.eps must be > 0");
}

void adam_step(std::span<ParamTensor* const> params, const GradientMap& grads,
               const AdamConfig& cfg) {
  for (ParamTensor* p : params) {
    const auto it = grads.find(p->name);
    if (it != grads.end() && it->second.size() != p->value.size()) {
      throw Error(ErrorCode::shape_mismatch, "gradient for " + p->name + " has shape " +
                                                 shape_str(it->second.shape()) + ", parameter " +
                                                 shape_str(p->value.shape()));
    }
    const double* g = it != grads.end() ? it->second.ptr() : nullptr;
    p->step_count += 1;
    const double t = static_cast<double>(p->step_count);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    double* w = p->value.ptr();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double gi = g != nullptr ? g[i] : 0.0;
      double& m = p->moment1[i];
      double& v = p->moment2[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * gi;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

}  // namespace devgan
