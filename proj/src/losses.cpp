#include "devgan/losses.hpp"

#include <cmath>
#include <set>

#include "devgan/error.hpp"
#include "devgan/ops.hpp"

namespace devgan {

namespace {

Var distance(Var a, Var b, Distance d) { return d == Distance::l1 ? ops::l1_loss(a, b) : ops::mse_loss(a, b); }

Var score_loss(Var scores, double target, AdvMode mode) {
  if (mode == AdvMode::cross_entropy) return ops::bce_with_logits(scores, target);
  return ops::mse_loss(scores, ops::full_like(scores, target));
}

}  // namespace

std::string_view distance_name(Distance d) { return d == Distance::l1 ? "l1" : "l2"; }

Distance parse_distance(std::string_view text) {
  if (text == "l1") return Distance::l1;
  if (text == "l2") return Distance::l2;
  throw Error(ErrorCode::config_value, "unknown distance '" + std::string(text) + "' (expected l1|l2)");
}

std::string_view adv_mode_name(AdvMode m) {
  return m == AdvMode::least_squares ? "least_squares" : "cross_entropy";
}

AdvMode parse_adv_mode(std::string_view text) {
  if (text == "least_squares") return AdvMode::least_squares;
  if (text == "cross_entropy") return AdvMode::cross_entropy;
  throw Error(ErrorCode::config_value,
              "unknown adv_mode '" + std::string(text) + "' (expected least_squares|cross_entropy)");
}

void LossWeights::validate() const {
  for (auto [name, v] : {std::pair{"lambda_cyc", lambda_cyc}, std::pair{"lambda_dev_a", lambda_dev_a},
                         std::pair{"lambda_dev_b", lambda_dev_b}, std::pair{"lambda_adv", lambda_adv}}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::config_value, std::string("weights.") + name + " must be finite and >= 0");
    }
  }
}

Var cyclic_loss(Var input_image, Var cyclic_image, Distance d) { return distance(input_image, cyclic_image, d); }

Var deviation_loss(Var enc_b, Var translated_enc_b, Var input_b, Var translated_cyclic_b, const LossWeights& w) {
  Var total = ops::scale(distance(enc_b, translated_enc_b, w.distance), w.lambda_dev_a);
  if (w.use_dev_term_b) {
    total = ops::add(total, ops::scale(distance(input_b, translated_cyclic_b, w.distance), w.lambda_dev_b));
  }
  return total;
}

Var adversarial_generator_loss(Var fake_scores, const LossWeights& w) {
  return score_loss(fake_scores, 1.0, w.adv_mode);
}

Var adversarial_discriminator_loss(Var real_scores, Var fake_scores, const LossWeights& w) {
  return ops::scale(ops::add(score_loss(real_scores, 1.0, w.adv_mode), score_loss(fake_scores, 0.0, w.adv_mode)),
                    0.5);
}

std::string_view loss_name(LossKind k) {
  switch (k) {
    case LossKind::cyclic: return "cyclic";
    case LossKind::deviation: return "deviation";
    case LossKind::adversarial_generator: return "adversarial_generator";
    case LossKind::adversarial_discriminator: return "adversarial_discriminator";
  }
  return "?";
}

std::vector<std::string_view> loss_scope(LossKind k) {
  switch (k) {
    case LossKind::cyclic: return {net::encoder, net::decoder};
    case LossKind::deviation:
    case LossKind::adversarial_generator: return {net::translator};
    case LossKind::adversarial_discriminator: return {net::discriminator};
  }
  return {};
}

std::vector<ParamTensor*> scoped_params(Model& m, LossKind k) {
  std::vector<ParamTensor*> out;
  for (std::string_view name : loss_scope(k)) {
    for (ParamTensor* p : m.network(name).pointers()) out.push_back(p);
  }
  return out;
}

void audit_scope(const Model& m, LossKind k, const GradientMap& grads) {
  std::set<std::string> expected;
  for (std::string_view name : loss_scope(k)) {
    for (const ParamTensor& p : m.network(name).params()) expected.insert(p.name);
  }
  for (const auto& [name, g] : grads) {
    if (!expected.contains(name)) {
      throw Error(ErrorCode::scope_violation,
                  std::string(loss_name(k)) + " loss produced a gradient for out-of-scope parameter " + name);
    }
  }
  for (const std::string& name : expected) {
    if (!grads.contains(name)) {
      throw Error(ErrorCode::scope_violation,
                  std::string(loss_name(k)) + " loss produced no gradient for in-scope parameter " + name);
    }
  }
}

}  // namespace devgan
