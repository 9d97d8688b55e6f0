#include <algorithm>

#include "doctest.h"
#include "devgan/error.hpp"
#include "devgan/gradcheck.hpp"
#include "devgan/ops.hpp"

using namespace devgan;

namespace {

// x^2 summed, with a deliberately wrong derivative of 3x instead of 2x.
Var broken_square_sum(Var x) {
  Tensor y(Shape{1});
  for (double v : x.value().data()) y[0] += v * v;
  return x.tape().record("broken_square_sum", std::move(y), {x}, [](const BackwardContext& c) {
    if (Tensor* g = c.grad(0)) {
      const Tensor& in = c.input(0);
      for (std::size_t i = 0; i < in.size(); ++i) (*g)[i] += 3.0 * in[i] * c.grad_output[0];
    }
  });
}

double run_broken(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(Shape{6});
  for (double& v : t.data()) v = u(rng);
  ParamTensor x("x", t);
  return gradient_error({&x}, [&](Tape& tape) { return broken_square_sum(tape.param(x)); });
}

}  // namespace

TEST_CASE("every default check passes at 1e-4") {
  const auto results = run_gradchecks(default_gradchecks());
  CHECK(results.size() == gradcheck_ops().size());
  for (const GradCheckResult& r : results) {
    CAPTURE(r.op);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("every differentiable op and loss is covered") {
  const auto ops = gradcheck_ops();
  for (const char* name : {"conv2d", "conv_transpose2d", "instance_norm", "relu", "leaky_relu", "tanh", "l1_loss",
                           "mse_loss", "bce_with_logits", "cyclic_loss", "deviation_loss",
                           "adversarial_generator_loss", "adversarial_discriminator_loss"}) {
    CAPTURE(name);
    CHECK(std::ranges::find(ops, name) != ops.end());
  }
}

TEST_CASE("filter runs exactly one op") {
  const auto results = run_gradchecks(default_gradchecks(), "instance_norm");
  REQUIRE(results.size() == 1);
  CHECK(results[0].op == "instance_norm");
  try {
    run_gradchecks(default_gradchecks(), "softmax");
    FAIL("expected unknown_op");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unknown_op);
    CHECK(std::string(e.what()).find("conv2d") != std::string::npos);
  }
}

TEST_CASE("a broken gradient rule is caught") {
  std::vector<GradCheck> checks = {{"broken_square_sum", run_broken}};
  const auto results = run_gradchecks(checks);
  REQUIRE(results.size() == 1);
  CHECK_FALSE(results[0].passed);
  // analytic 3x vs numeric 2x: relative error 1/3.
  CHECK(results[0].max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("checks are reproducible for a seed") {
  const auto a = run_gradchecks(default_gradchecks(), "conv2d", 1e-4, 9);
  const auto b = run_gradchecks(default_gradchecks(), "conv2d", 1e-4, 9);
  CHECK(a[0].max_rel_error == b[0].max_rel_error);
}
