#pragma once

// Loss families and the networks each one is allowed to update.

#include <string_view>
#include <vector>

#include "devgan/networks.hpp"
#include "devgan/tape.hpp"

namespace devgan {

enum class Distance { l1, l2 };
enum class AdvMode { least_squares, cross_entropy };

std::string_view distance_name(Distance d);
Distance parse_distance(std::string_view text);
std::string_view adv_mode_name(AdvMode m);
AdvMode parse_adv_mode(std::string_view text);

struct LossWeights {
  double lambda_cyc = 10.0;
  double lambda_dev_a = 10.0;
  double lambda_dev_b = 10.0;
  double lambda_adv = 1.0;
  bool use_dev_term_b = true;
  AdvMode adv_mode = AdvMode::least_squares;
  Distance distance = Distance::l1;

  /// Throws ErrorCode::config_value on a negative or non-finite lambda.
  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Mean L1 (or squared L2) between an image and its encode-decode
/// reconstruction.
Var cyclic_loss(Var input_image, Var cyclic_image, Distance d = Distance::l1);

/// lambda_dev_a * dist(enc_b, translated_enc_b)
///   + lambda_dev_b * dist(input_b, translated_cyclic_b)   if use_dev_term_b.
/// With the toggle off the last two arguments are ignored and may be
/// default-constructed.
Var deviation_loss(Var enc_b, Var translated_enc_b, Var input_b, Var translated_cyclic_b,
                   const LossWeights& w);

/// Unweighted; callers scale by lambda_adv.
Var adversarial_generator_loss(Var fake_scores, const LossWeights& w);
/// 0.5 * (loss(real, 1) + loss(fake, 0)). `fake_scores` must come from a
/// detached fake.
Var adversarial_discriminator_loss(Var real_scores, Var fake_scores, const LossWeights& w);

enum class LossKind { cyclic, deviation, adversarial_generator, adversarial_discriminator };

std::string_view loss_name(LossKind k);

/// Networks a loss may update in the proposed model.
std::vector<std::string_view> loss_scope(LossKind k);

/// Parameters of loss_scope(k), in network order.
std::vector<ParamTensor*> scoped_params(Model& m, LossKind k);

/// Throws ErrorCode::scope_violation unless `grads` holds exactly the
/// parameters of loss_scope(k).
void audit_scope(const Model& m, LossKind k, const GradientMap& grads);

}  // namespace devgan
