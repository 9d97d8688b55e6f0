#pragma once

// Finite-difference verification of every differentiable kernel and loss.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "devgan/tape.hpp"

namespace devgan {

/// Builds a scalar on a fresh tape from parameters the caller owns.
using ScalarBuilder = std::function<Var(Tape&)>;

/// max over elements of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6),
/// numeric by central differences with step `eps`.
double gradient_error(const std::vector<ParamTensor*>& params, const ScalarBuilder& f, double eps = 1e-5);

struct GradCheck {
  std::string op;
  /// Runs every case of the op and returns the worst relative error.
  std::function<double(std::mt19937_64&)> run;
};

struct GradCheckResult {
  std::string op;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Checks for conv2d, conv_transpose2d, instance_norm, the activations,
/// add/scale/sum, l1/mse/bce and the four training losses; three or more
/// random shapes each, kept away from kinks.
std::vector<GradCheck> default_gradchecks();

/// Names of default_gradchecks(), in order.
std::vector<std::string> gradcheck_ops();

/// Runs the checks whose op equals `only` (all if empty). Throws
/// ErrorCode::unknown_op if `only` names no check.
std::vector<GradCheckResult> run_gradchecks(const std::vector<GradCheck>& checks,
                                            const std::optional<std::string>& only = std::nullopt,
                                            double tolerance = 1e-4, std::uint64_t seed = 1);

}  // namespace devgan
