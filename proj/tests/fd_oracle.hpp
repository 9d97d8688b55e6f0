#pragma once

// Test-only central finite differences. Re-evaluates the forward graph on
// perturbed copies of the parameters; never touches gradient rules.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "devgan/ops.hpp"
#include "devgan/tape.hpp"

namespace fd {

using Builder = std::function<devgan::Var(devgan::Tape&)>;

inline double evaluate(const Builder& f) {
  devgan::Tape tape;
  return f(tape).value().item();
}

inline std::vector<devgan::Tensor> numeric_gradients(const std::vector<devgan::ParamTensor*>& params,
                                                     const Builder& f, double eps = 1e-5) {
  std::vector<devgan::Tensor> out;
  for (devgan::ParamTensor* p : params) {
    devgan::Tensor g(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double plus = evaluate(f);
      p->value[i] = saved - eps;
      const double minus = evaluate(f);
      p->value[i] = saved;
      g[i] = (plus - minus) / (2.0 * eps);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline devgan::GradientMap analytic_gradients(const std::vector<devgan::ParamTensor*>& params,
                                              const Builder& f) {
  devgan::Tape tape;
  const devgan::Var root = f(tape);
  return tape.backward(root, params);
}

/// max over elements of |a - n| / max(|a|, |n|, floor)
inline double max_relative_error(const std::vector<devgan::ParamTensor*>& params,
                                 const Builder& f, double floor = 1e-6) {
  const auto numeric = numeric_gradients(params, f);
  const auto analytic = analytic_gradients(params, f);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const devgan::Tensor& a = analytic.at(params[k]->name);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double n = numeric[k][i];
      const double denom = std::max({std::abs(a[i]), std::abs(n), floor});
      worst = std::max(worst, std::abs(a[i] - n) / denom);
    }
  }
  return worst;
}

inline devgan::Tensor random_tensor(devgan::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  devgan::Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

/// Values bounded away from zero by `gap` (keeps relu/l1 kinks out of reach).
inline devgan::Tensor random_away_from_zero(devgan::Shape shape, std::mt19937_64& rng,
                                            double gap = 1e-2) {
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  devgan::Tensor t(std::move(shape));
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

}  // namespace fd
