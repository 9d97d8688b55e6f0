#include "devgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "devgan/error.hpp"
#include "devgan/losses.hpp"
#include "devgan/ops.hpp"

namespace devgan {

namespace {

double evaluate(const ScalarBuilder& f) {
  Tape tape;
  return f(tape).value().item();
}

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Magnitudes in [gap, 1] with random sign.
Tensor away_from_zero(Shape shape, std::mt19937_64& rng, double gap = 1e-2) {
  std::uniform_real_distribution<double> u(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = sign(rng) ? u(rng) : -u(rng);
  return t;
}

// b = a + d with |d| >= gap, so |a - b| stays clear of the L1 kink.
Tensor offset_from(const Tensor& a, std::mt19937_64& rng) {
  Tensor d = away_from_zero(a.shape(), rng, 0.05);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += a[i];
  return d;
}

struct ConvCase {
  Shape x, w;
  std::size_t stride, pad, output_pad;
};

double check_conv(std::mt19937_64& rng, bool transposed) {
  // conv2d weights are [Cout,Cin,k,k]; transposed weights are [Cin,Cout,k,k].
  const std::vector<ConvCase> conv = {{{2, 3, 5, 5}, {4, 3, 3, 3}, 1, 0, 0},
                                      {{1, 2, 6, 6}, {3, 2, 3, 3}, 2, 1, 0},
                                      {{1, 2, 7, 7}, {2, 2, 7, 7}, 1, 3, 0},
                                      {{2, 3, 8, 8}, {2, 3, 4, 4}, 2, 1, 0}};
  const std::vector<ConvCase> deconv = {{{2, 3, 3, 3}, {3, 2, 3, 3}, 2, 1, 1},
                                        {{1, 2, 4, 4}, {2, 3, 3, 3}, 1, 1, 0},
                                        {{1, 3, 3, 3}, {3, 2, 4, 4}, 2, 1, 0},
                                        {{1, 2, 2, 2}, {2, 2, 7, 7}, 1, 3, 0}};
  double worst = 0.0;
  for (const ConvCase& c : transposed ? deconv : conv) {
    ParamTensor x("x", uniform(c.x, rng));
    ParamTensor w("w", uniform(c.w, rng));
    ParamTensor b("b", uniform({transposed ? c.w[1] : c.w[0]}, rng));
    auto fwd = [&](Tape& t) {
      return transposed ? ops::conv_transpose2d(t.param(x), t.param(w), t.param(b), c.stride, c.pad, c.output_pad)
                        : ops::conv2d(t.param(x), t.param(w), t.param(b), c.stride, c.pad);
    };
    Tape probe;
    const Tensor proj = uniform(fwd(probe).shape(), rng);
    worst = std::max(worst, gradient_error({&x, &w, &b}, [&](Tape& t) { return ops::weighted_sum(fwd(t), proj); }));
  }
  return worst;
}

double check_instance_norm(std::mt19937_64& rng) {
  double worst = 0.0;
  for (const Shape& s : {Shape{1, 2, 3, 3}, Shape{2, 3, 4, 4}, Shape{2, 1, 5, 2}}) {
    ParamTensor x("x", uniform(s, rng));
    ParamTensor g("gamma", uniform({s[1]}, rng, 0.5, 1.5));
    ParamTensor b("beta", uniform({s[1]}, rng));
    const Tensor proj = uniform(s, rng);
    worst = std::max(worst, gradient_error({&x, &g, &b}, [&](Tape& t) {
                       return ops::weighted_sum(ops::instance_norm(t.param(x), t.param(g), t.param(b)), proj);
                     }));
  }
  return worst;
}

double check_activation(std::mt19937_64& rng, ops::Activation act) {
  double worst = 0.0;
  for (const Shape& s : {Shape{7}, Shape{2, 3, 4}, Shape{1, 2, 3, 3}}) {
    ParamTensor x("x", away_from_zero(s, rng, 1e-3));
    const Tensor proj = uniform(s, rng);
    worst = std::max(worst, gradient_error({&x}, [&](Tape& t) {
                       return ops::weighted_sum(ops::activation(t.param(x), act), proj);
                     }));
  }
  return worst;
}

double check_arith(std::mt19937_64& rng) {
  double worst = 0.0;
  for (const Shape& s : {Shape{5}, Shape{2, 3}, Shape{1, 2, 3, 3}}) {
    ParamTensor a("a", uniform(s, rng));
    ParamTensor b("b", uniform(s, rng));
    const Tensor proj = uniform(s, rng);
    worst = std::max(worst, gradient_error({&a, &b}, [&](Tape& t) {
                       return ops::add(ops::weighted_sum(ops::add(t.param(a), ops::scale(t.param(b), -1.7)), proj),
                                       ops::sum(t.param(b)));
                     }));
  }
  return worst;
}

template <class F>
double check_pair_loss(std::mt19937_64& rng, F loss) {
  double worst = 0.0;
  for (const Shape& s : {Shape{5}, Shape{2, 3}, Shape{1, 2, 3, 3}}) {
    ParamTensor a("a", uniform(s, rng));
    ParamTensor b("b", offset_from(a.value, rng));
    worst = std::max(worst, gradient_error({&a, &b}, [&](Tape& t) { return loss(t.param(a), t.param(b)); }));
  }
  return worst;
}

double check_bce(std::mt19937_64& rng) {
  double worst = 0.0;
  for (const Shape& s : {Shape{4}, Shape{2, 1, 2, 2}, Shape{3, 1, 3, 3}}) {
    ParamTensor x("x", uniform(s, rng, -3.0, 3.0));
    for (double target : {0.0, 1.0}) {
      worst = std::max(worst, gradient_error({&x}, [&](Tape& t) { return ops::bce_with_logits(t.param(x), target); }));
    }
  }
  return worst;
}

double check_deviation(std::mt19937_64& rng) {
  double worst = 0.0;
  for (bool use_b : {true, false}) {
    for (const Shape& s : {Shape{1, 4, 2, 2}, Shape{2, 3, 3, 3}, Shape{1, 2, 4, 4}}) {
      LossWeights w;
      w.use_dev_term_b = use_b;
      ParamTensor e("e", uniform(s, rng));
      ParamTensor te("te", offset_from(e.value, rng));
      ParamTensor x("x", uniform(s, rng));
      ParamTensor tx("tx", offset_from(x.value, rng));
      worst = std::max(worst, gradient_error({&e, &te, &x, &tx}, [&](Tape& t) {
                         return deviation_loss(t.param(e), t.param(te), t.param(x), t.param(tx), w);
                       }));
    }
  }
  return worst;
}

double check_adversarial(std::mt19937_64& rng, bool generator) {
  double worst = 0.0;
  for (AdvMode mode : {AdvMode::least_squares, AdvMode::cross_entropy}) {
    LossWeights w;
    w.adv_mode = mode;
    for (const Shape& s : {Shape{1, 1, 2, 2}, Shape{2, 1, 3, 3}, Shape{3, 1, 1, 1}}) {
      ParamTensor real("real", uniform(s, rng));
      ParamTensor fake("fake", uniform(s, rng));
      if (generator) {
        worst = std::max(worst, gradient_error({&fake}, [&](Tape& t) {
                           return adversarial_generator_loss(t.param(fake), w);
                         }));
      } else {
        worst = std::max(worst, gradient_error({&real, &fake}, [&](Tape& t) {
                           return adversarial_discriminator_loss(t.param(real), t.param(fake), w);
                         }));
      }
    }
  }
  return worst;
}

}  // namespace

double gradient_error(const std::vector<ParamTensor*>& params, const ScalarBuilder& f, double eps) {
  GradientMap analytic;
  {
    Tape tape;
    const Var root = f(tape);
    analytic = tape.backward(root, params);
  }
  double worst = 0.0;
  for (ParamTensor* p : params) {
    const Tensor& a = analytic.at(p->name);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double plus = evaluate(f);
      p->value[i] = saved - eps;
      const double minus = evaluate(f);
      p->value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a[i] - numeric) / denom);
    }
  }
  return worst;
}

std::vector<GradCheck> default_gradchecks() {
  using ops::Activation;
  using ops::ActivationKind;
  return {
      {"conv2d", [](std::mt19937_64& r) { return check_conv(r, false); }},
      {"conv_transpose2d", [](std::mt19937_64& r) { return check_conv(r, true); }},
      {"instance_norm", check_instance_norm},
      {"relu", [](std::mt19937_64& r) { return check_activation(r, Activation{ActivationKind::relu}); }},
      {"leaky_relu", [](std::mt19937_64& r) { return check_activation(r, Activation{ActivationKind::leaky_relu, 0.2}); }},
      {"tanh", [](std::mt19937_64& r) { return check_activation(r, Activation{ActivationKind::tanh}); }},
      {"add_scale_sum", check_arith},
      {"l1_loss", [](std::mt19937_64& r) { return check_pair_loss(r, [](Var a, Var b) { return ops::l1_loss(a, b); }); }},
      {"mse_loss", [](std::mt19937_64& r) { return check_pair_loss(r, [](Var a, Var b) { return ops::mse_loss(a, b); }); }},
      {"bce_with_logits", check_bce},
      {"cyclic_loss",
       [](std::mt19937_64& r) {
         return std::max(check_pair_loss(r, [](Var a, Var b) { return cyclic_loss(a, b, Distance::l1); }),
                         check_pair_loss(r, [](Var a, Var b) { return cyclic_loss(a, b, Distance::l2); }));
       }},
      {"deviation_loss", check_deviation},
      {"adversarial_generator_loss", [](std::mt19937_64& r) { return check_adversarial(r, true); }},
      {"adversarial_discriminator_loss", [](std::mt19937_64& r) { return check_adversarial(r, false); }},
  };
}

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> out;
  for (const GradCheck& c : default_gradchecks()) out.push_back(c.op);
  return out;
}

std::vector<GradCheckResult> run_gradchecks(const std::vector<GradCheck>& checks, const std::optional<std::string>& only,
                                            double tolerance, std::uint64_t seed) {
  std::vector<GradCheckResult> out;
  for (const GradCheck& c : checks) {
    if (only && c.op != *only) continue;
    std::mt19937_64 rng(seed);
    GradCheckResult r;
    r.op = c.op;
    r.max_rel_error = c.run(rng);
    r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error <= tolerance;
    out.push_back(r);
  }
  if (only && out.empty()) {
    std::string known;
    for (const GradCheck& c : checks) known += (known.empty() ? "" : ", ") + c.op;
    throw Error(ErrorCode::unknown_op, "unknown op '" + *only + "' (known: " + known + ")");
  }
  return out;
}

}  // namespace devgan
