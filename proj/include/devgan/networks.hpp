#pragma once

// The proposed model (shared encoder/decoder, one translator, a discriminator
// over encodings) and the two-generator baseline, as named parameter bundles
// plus forward functions.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "devgan/optim.hpp"
#include "devgan/tape.hpp"

namespace devgan {

struct ArchSpec {
  std::size_t image_size = 64;
  std::size_t base_channels = 32;
  std::size_t encoder_downsamples = 2;
  std::size_t translator_resblocks = 4;
  std::size_t disc_layers = 3;

  /// Throws ErrorCode::invalid_argument. translator_resblocks may be 0. The
  /// encoding must leave every normed discriminator layer at least 2x2.
  void validate() const;

  std::size_t encoding_channels() const { return base_channels << encoder_downsamples; }
  std::size_t encoding_size() const { return image_size >> encoder_downsamples; }

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

enum class ModelKind { proposed, baseline };

std::string_view model_name(ModelKind kind);
/// Throws ErrorCode::config_value for anything but "proposed" / "baseline".
ModelKind parse_model(std::string_view text);

namespace net {
inline constexpr std::string_view encoder = "encoder";
inline constexpr std::string_view decoder = "decoder";
inline constexpr std::string_view translator = "translator";
inline constexpr std::string_view discriminator = "discriminator";
inline constexpr std::string_view translator_b2a = "baseline_translator_b2a";
inline constexpr std::string_view discriminator_a = "baseline_discriminator_a";
inline constexpr std::string_view discriminator_b = "baseline_discriminator_b";
}  // namespace net

/// One network's parameters. Names are full dotted paths such as
/// "encoder.conv0.weight". The vector is never resized after construction, so
/// pointers into it stay valid.
class NetworkParams {
 public:
  NetworkParams() = default;
  NetworkParams(std::string name, ArchSpec arch) : name_(std::move(name)), arch_(arch) {}

  const std::string& name() const { return name_; }
  const ArchSpec& arch() const { return arch_; }

  void add(ParamTensor p);
  ParamTensor& at(std::string_view full_name);
  const ParamTensor& at(std::string_view full_name) const;
  bool contains(std::string_view full_name) const;

  std::vector<ParamTensor>& params() { return params_; }
  const std::vector<ParamTensor>& params() const { return params_; }
  std::vector<ParamTensor*> pointers();
  /// Total scalar count.
  std::size_t count() const;

 private:
  std::string name_;
  ArchSpec arch_;
  std::vector<ParamTensor> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Proposed: encoder, decoder, translator, discriminator.
/// Baseline: encoder, translator, decoder (generator A->B),
/// baseline_translator_b2a (a full generator B->A), and two image-space
/// discriminators.
class Model {
 public:
  Model() = default;
  Model(ModelKind kind, ArchSpec arch) : kind_(kind), arch_(arch) {}

  ModelKind kind() const { return kind_; }
  const ArchSpec& arch() const { return arch_; }

  NetworkParams& network(std::string_view name);
  const NetworkParams& network(std::string_view name) const;
  bool has(std::string_view name) const;
  std::vector<NetworkParams>& networks() { return networks_; }
  const std::vector<NetworkParams>& networks() const { return networks_; }
  void add(NetworkParams n) { networks_.push_back(std::move(n)); }

  /// Pointers to every parameter of the named networks, in network order.
  std::vector<ParamTensor*> params_of(std::initializer_list<std::string_view> names);
  std::size_t count(std::string_view name) const { return network(name).count(); }

  friend bool operator==(const Model& a, const Model& b);

 private:
  ModelKind kind_ = ModelKind::proposed;
  ArchSpec arch_;
  std::vector<NetworkParams> networks_;
};

/// Network names present in a model of the given kind, in storage order.
std::vector<std::string_view> network_names(ModelKind kind);

/// Conv weights ~ N(0, 0.02), norm gamma 1, beta 0, biases 0. Each tensor
/// draws from its own stream keyed by (seed, name), so shared names get equal
/// values across model kinds.
Model init_model(const ArchSpec& arch, ModelKind kind, std::uint64_t seed);

// Forward passes. `prefix` defaults to the network name; the baseline B->A
// generator uses "baseline_translator_b2a.encoder" and friends.

/// [N,3,S,S] -> [N,Ce,S',S']
Var encode(NetworkParams& enc, Var image);
/// [N,Ce,S',S'] -> [N,3,S,S], values in (-1,1)
Var decode(NetworkParams& dec, Var encoding);
/// Shape-preserving residual stack.
Var translate(NetworkParams& tr, Var encoding);
/// Patch scores [N,1,P,P]; accepts encodings (proposed) or images (baseline).
Var discriminate(NetworkParams& disc, Var input);

/// Baseline generator: decode(translate(encode(x))) with the three stages
/// taken from `g` under prefixes "<g.name>.encoder" etc. For the A->B
/// generator pass the model itself via generate_a2b.
Var generate_b2a(NetworkParams& g, Var image);
Var generate_a2b(Model& m, Var image);

enum class Phase { train_step, inference };

/// Multiply-accumulate counts of one forward pass (convolutions only).
struct ForwardMacs {
  std::uint64_t encoder = 0;
  std::uint64_t translator = 0;
  std::uint64_t decoder = 0;
  std::uint64_t encoding_discriminator = 0;
  std::uint64_t image_discriminator = 0;
};

ForwardMacs forward_macs(const ArchSpec& arch);

/// FLOPs (2 per MAC) over the convolutions a phase executes. For train_step
/// this is 3x the forward count: the forward passes plus a 2x backward
/// estimate. Norms, activations and losses are not counted.
std::uint64_t count_flops(const ArchSpec& arch, ModelKind model, Phase phase,
                          bool use_dev_term_b = true);

/// Forward conv MACs of one train step (the quantity count_flops scales).
std::uint64_t train_step_forward_macs(const ArchSpec& arch, ModelKind model,
                                      bool use_dev_term_b = true);

}  // namespace devgan
