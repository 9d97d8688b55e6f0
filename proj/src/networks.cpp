#include "devgan/networks.hpp"

#include <random>

#include "devgan/error.hpp"
#include "devgan/ops.hpp"

namespace devgan {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kLeakySlope = 0.2;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string join(std::string_view prefix, std::string_view leaf) {
  std::string out(prefix);
  out += '.';
  out += leaf;
  return out;
}

std::string indexed(std::string_view stem, std::size_t i) { return std::string(stem) + std::to_string(i); }

class Builder {
 public:
  Builder(NetworkParams& net, std::uint64_t seed) : net_(net), seed_(seed) {}

  void conv(const std::string& name, std::size_t d0, std::size_t d1, std::size_t k, std::size_t bias) {
    Tensor w(Shape{d0, d1, k, k});
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(fnv1a(name)), static_cast<std::uint32_t>(fnv1a(name) >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, kInitStd);
    for (double& v : w.data()) v = normal(rng);
    net_.add(ParamTensor(name + ".weight", std::move(w)));
    net_.add(ParamTensor(name + ".bias", Tensor(Shape{bias}, 0.0)));
  }

  void norm(const std::string& name, std::size_t channels) {
    net_.add(ParamTensor(name + ".gamma", Tensor(Shape{channels}, 1.0)));
    net_.add(ParamTensor(name + ".beta", Tensor(Shape{channels}, 0.0)));
  }

 private:
  NetworkParams& net_;
  std::uint64_t seed_;
};

void build_encoder(Builder& b, std::string_view p, const ArchSpec& a) {
  b.conv(join(p, "conv0"), a.base_channels, 3, 7, a.base_channels);
  b.norm(join(p, "norm0"), a.base_channels);
  for (std::size_t i = 1; i <= a.encoder_downsamples; ++i) {
    const std::size_t cin = a.base_channels << (i - 1), cout = a.base_channels << i;
    b.conv(join(p, indexed("conv", i)), cout, cin, 3, cout);
    b.norm(join(p, indexed("norm", i)), cout);
  }
}

void build_translator(Builder& b, std::string_view p, const ArchSpec& a) {
  const std::size_t c = a.encoding_channels();
  for (std::size_t k = 0; k < a.translator_resblocks; ++k) {
    const std::string blk = join(p, indexed("block", k));
    b.conv(join(blk, "conv0"), c, c, 3, c);
    b.norm(join(blk, "norm0"), c);
    b.conv(join(blk, "conv1"), c, c, 3, c);
    b.norm(join(blk, "norm1"), c);
  }
}

void build_decoder(Builder& b, std::string_view p, const ArchSpec& a) {
  for (std::size_t i = 0; i < a.encoder_downsamples; ++i) {
    const std::size_t cin = a.encoding_channels() >> i, cout = cin / 2;
    b.conv(join(p, indexed("up", i)), cin, cout, 3, cout);
    b.norm(join(p, indexed("norm", i)), cout);
  }
  b.conv(join(p, "out"), 3, a.base_channels, 7, 3);
}

void build_discriminator(Builder& b, std::string_view p, const ArchSpec& a, std::size_t in_channels) {
  std::size_t cin = in_channels;
  for (std::size_t i = 0; i < a.disc_layers; ++i) {
    const std::size_t cout = a.base_channels << i;
    b.conv(join(p, indexed("conv", i)), cout, cin, 4, cout);
    if (i > 0) b.norm(join(p, indexed("norm", i)), cout);
    cin = cout;
  }
  b.conv(join(p, "head"), 1, cin, 3, 1);
}

Var conv(NetworkParams& n, const std::string& name, Var x, std::size_t stride, std::size_t pad) {
  Tape& t = x.tape();
  return ops::conv2d(x, t.param(n.at(name + ".weight")), t.param(n.at(name + ".bias")), stride, pad);
}

Var up(NetworkParams& n, const std::string& name, Var x) {
  Tape& t = x.tape();
  return ops::conv_transpose2d(x, t.param(n.at(name + ".weight")), t.param(n.at(name + ".bias")), 2, 1, 1);
}

Var norm(NetworkParams& n, const std::string& name, Var x) {
  Tape& t = x.tape();
  return ops::instance_norm(x, t.param(n.at(name + ".gamma")), t.param(n.at(name + ".beta")));
}

void expect_shape(const Var& x, const Shape& want, std::string_view what) {
  const Shape& s = x.shape();
  bool ok = s.size() == 4 && s[1] == want[1] && s[2] == want[2] && s[3] == want[3];
  if (!ok) {
    throw Error(ErrorCode::shape_mismatch, std::string(what) + ": expected [Nx" + std::to_string(want[1]) + "x" +
                                               std::to_string(want[2]) + "x" + std::to_string(want[3]) +
                                               "], got " + shape_str(s));
  }
}

Var encode_at(NetworkParams& n, std::string_view p, Var image) {
  const ArchSpec& a = n.arch();
  expect_shape(image, {0, 3, a.image_size, a.image_size}, "encode");
  Var x = ops::relu(norm(n, join(p, "norm0"), conv(n, join(p, "conv0"), image, 1, 3)));
  for (std::size_t i = 1; i <= a.encoder_downsamples; ++i) {
    x = ops::relu(norm(n, join(p, indexed("norm", i)), conv(n, join(p, indexed("conv", i)), x, 2, 1)));
  }
  return x;
}

Var translate_at(NetworkParams& n, std::string_view p, Var e) {
  const ArchSpec& a = n.arch();
  expect_shape(e, {0, a.encoding_channels(), a.encoding_size(), a.encoding_size()}, "translate");
  for (std::size_t k = 0; k < a.translator_resblocks; ++k) {
    const std::string blk = join(p, indexed("block", k));
    Var h = ops::relu(norm(n, join(blk, "norm0"), conv(n, join(blk, "conv0"), e, 1, 1)));
    h = norm(n, join(blk, "norm1"), conv(n, join(blk, "conv1"), h, 1, 1));
    e = ops::add(e, h);
  }
  return e;
}

Var decode_at(NetworkParams& n, std::string_view p, Var e) {
  const ArchSpec& a = n.arch();
  expect_shape(e, {0, a.encoding_channels(), a.encoding_size(), a.encoding_size()}, "decode");
  for (std::size_t i = 0; i < a.encoder_downsamples; ++i) {
    e = ops::relu(norm(n, join(p, indexed("norm", i)), up(n, join(p, indexed("up", i)), e)));
  }
  return ops::tanh(conv(n, join(p, "out"), e, 1, 3));
}

std::uint64_t conv_macs(std::size_t out_hw, std::size_t cout, std::size_t cin, std::size_t k) {
  return static_cast<std::uint64_t>(out_hw) * out_hw * cout * cin * k * k;
}

std::uint64_t disc_macs(const ArchSpec& a, std::size_t in_channels, std::size_t in_size) {
  std::uint64_t total = 0;
  std::size_t cin = in_channels, size = in_size;
  for (std::size_t i = 0; i < a.disc_layers; ++i) {
    size = (size + 2 - 4) / 2 + 1;
    const std::size_t cout = a.base_channels << i;
    total += conv_macs(size, cout, cin, 4);
    cin = cout;
  }
  return total + conv_macs(size, 1, cin, 3);
}

}  // namespace

void ArchSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, "arch: " + m); };
  if (image_size < 1 || base_channels < 1 || encoder_downsamples < 1 || disc_layers < 1) {
    fail("image_size, base_channels, encoder_downsamples and disc_layers must be >= 1");
  }
  if (encoder_downsamples > 16 || disc_layers > 16) fail("layer counts too large");
  if (image_size % (std::size_t{1} << encoder_downsamples) != 0) {
    fail("image_size " + std::to_string(image_size) + " not divisible by 2^" +
         std::to_string(encoder_downsamples));
  }
  // Instance norm over a 1x1 map is constant, so normed layers need >= 2x2.
  const std::size_t min_size = std::size_t{1} << (disc_layers + (disc_layers > 1 ? 1 : 0));
  if (encoding_size() < min_size) {
    fail("encoding size " + std::to_string(encoding_size()) + " too small for " + std::to_string(disc_layers) +
         " discriminator layers (need " + std::to_string(min_size) + ")");
  }
}

std::string_view model_name(ModelKind kind) { return kind == ModelKind::proposed ? "proposed" : "baseline"; }

ModelKind parse_model(std::string_view text) {
  if (text == "proposed") return ModelKind::proposed;
  if (text == "baseline") return ModelKind::baseline;
  throw Error(ErrorCode::config_value, "unknown model '" + std::string(text) + "' (expected proposed|baseline)");
}

void NetworkParams::add(ParamTensor p) {
  if (index_.contains(p.name)) throw Error(ErrorCode::invalid_argument, "duplicate parameter " + p.name);
  index_.emplace(p.name, params_.size());
  params_.push_back(std::move(p));
}

ParamTensor& NetworkParams::at(std::string_view full_name) {
  auto it = index_.find(full_name);
  if (it == index_.end()) {
    throw Error(ErrorCode::invalid_argument, "network " + name_ + " has no parameter " + std::string(full_name));
  }
  return params_[it->second];
}

const ParamTensor& NetworkParams::at(std::string_view full_name) const {
  return const_cast<NetworkParams*>(this)->at(full_name);
}

bool NetworkParams::contains(std::string_view full_name) const { return index_.find(full_name) != index_.end(); }

std::vector<ParamTensor*> NetworkParams::pointers() {
  std::vector<ParamTensor*> out;
  for (ParamTensor& p : params_) out.push_back(&p);
  return out;
}

std::size_t NetworkParams::count() const {
  std::size_t n = 0;
  for (const ParamTensor& p : params_) n += p.value.size();
  return n;
}

NetworkParams& Model::network(std::string_view name) {
  for (NetworkParams& n : networks_) {
    if (n.name() == name) return n;
  }
  throw Error(ErrorCode::invalid_argument,
              std::string(model_name(kind_)) + " model has no network " + std::string(name));
}

const NetworkParams& Model::network(std::string_view name) const {
  return const_cast<Model*>(this)->network(name);
}

bool Model::has(std::string_view name) const {
  for (const NetworkParams& n : networks_) {
    if (n.name() == name) return true;
  }
  return false;
}

std::vector<ParamTensor*> Model::params_of(std::initializer_list<std::string_view> names) {
  std::vector<ParamTensor*> out;
  for (std::string_view name : names) {
    for (ParamTensor* p : network(name).pointers()) out.push_back(p);
  }
  return out;
}

bool operator==(const Model& a, const Model& b) {
  if (a.kind_ != b.kind_ || !(a.arch_ == b.arch_) || a.networks_.size() != b.networks_.size()) return false;
  for (std::size_t i = 0; i < a.networks_.size(); ++i) {
    const auto& pa = a.networks_[i].params();
    const auto& pb = b.networks_[i].params();
    if (a.networks_[i].name() != b.networks_[i].name() || pa.size() != pb.size()) return false;
    for (std::size_t j = 0; j < pa.size(); ++j) {
      if (pa[j].name != pb[j].name || !(pa[j].value == pb[j].value) || pa[j].moment1 != pb[j].moment1 ||
          pa[j].moment2 != pb[j].moment2 || pa[j].step_count != pb[j].step_count) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::string_view> network_names(ModelKind kind) {
  if (kind == ModelKind::proposed) return {net::encoder, net::decoder, net::translator, net::discriminator};
  return {net::encoder, net::translator, net::decoder, net::translator_b2a, net::discriminator_a,
          net::discriminator_b};
}

Model init_model(const ArchSpec& arch, ModelKind kind, std::uint64_t seed) {
  arch.validate();
  Model m(kind, arch);
  for (std::string_view name : network_names(kind)) {
    NetworkParams n(std::string(name), arch);
    Builder b(n, seed);
    if (name == net::encoder) {
      build_encoder(b, name, arch);
    } else if (name == net::decoder) {
      build_decoder(b, name, arch);
    } else if (name == net::translator) {
      build_translator(b, name, arch);
    } else if (name == net::discriminator) {
      build_discriminator(b, name, arch, arch.encoding_channels());
    } else if (name == net::translator_b2a) {
      build_encoder(b, join(name, "encoder"), arch);
      build_translator(b, join(name, "translator"), arch);
      build_decoder(b, join(name, "decoder"), arch);
    } else {
      build_discriminator(b, name, arch, 3);
    }
    m.add(std::move(n));
  }
  return m;
}

Var encode(NetworkParams& enc, Var image) { return encode_at(enc, enc.name(), image); }
Var decode(NetworkParams& dec, Var encoding) { return decode_at(dec, dec.name(), encoding); }
Var translate(NetworkParams& tr, Var encoding) { return translate_at(tr, tr.name(), encoding); }

Var discriminate(NetworkParams& d, Var input) {
  const ArchSpec& a = d.arch();
  const std::string p = d.name();
  const bool on_encodings = p == net::discriminator;
  const std::size_t cin = on_encodings ? a.encoding_channels() : 3;
  const std::size_t size = on_encodings ? a.encoding_size() : a.image_size;
  expect_shape(input, {0, cin, size, size}, "discriminate");
  Var x = ops::leaky_relu(conv(d, join(p, "conv0"), input, 2, 1), kLeakySlope);
  for (std::size_t i = 1; i < a.disc_layers; ++i) {
    x = ops::leaky_relu(norm(d, join(p, indexed("norm", i)), conv(d, join(p, indexed("conv", i)), x, 2, 1)),
                        kLeakySlope);
  }
  return conv(d, join(p, "head"), x, 1, 1);
}

Var generate_b2a(NetworkParams& g, Var image) {
  const std::string& p = g.name();
  return decode_at(g, join(p, "decoder"), translate_at(g, join(p, "translator"), encode_at(g, join(p, "encoder"), image)));
}

Var generate_a2b(Model& m, Var image) {
  return decode(m.network(net::decoder), translate(m.network(net::translator), encode(m.network(net::encoder), image)));
}

ForwardMacs forward_macs(const ArchSpec& a) {
  a.validate();
  ForwardMacs f;
  f.encoder = conv_macs(a.image_size, a.base_channels, 3, 7);
  for (std::size_t i = 1; i <= a.encoder_downsamples; ++i) {
    f.encoder += conv_macs(a.image_size >> i, a.base_channels << i, a.base_channels << (i - 1), 3);
  }
  const std::size_t ce = a.encoding_channels(), se = a.encoding_size();
  f.translator = 2 * a.translator_resblocks * conv_macs(se, ce, ce, 3);
  for (std::size_t i = 0; i < a.encoder_downsamples; ++i) {
    // transposed conv: every input position scatters a full Cin x Cout x k x k product
    f.decoder += conv_macs(se << i, ce >> i, ce >> (i + 1), 3);
  }
  f.decoder += conv_macs(a.image_size, 3, a.base_channels, 7);
  f.encoding_discriminator = disc_macs(a, ce, se);
  f.image_discriminator = disc_macs(a, 3, a.image_size);
  return f;
}

std::uint64_t train_step_forward_macs(const ArchSpec& arch, ModelKind model, bool use_dev_term_b) {
  const ForwardMacs f = forward_macs(arch);
  if (model == ModelKind::proposed) {
    // D step: E(a), E(b), T(E(a)), D(real), D(fake).
    // G step: dec(E(a)), dec(E(b)), T(E(b)), [dec(T(E(b)))], D(fake) with updated D.
    const std::uint64_t decodes = use_dev_term_b ? 3 : 2;
    return 2 * f.encoder + 2 * f.translator + decodes * f.decoder + 3 * f.encoding_discriminator;
  }
  // D step: G_ab(a), G_ba(b), four discriminator passes.
  // G step: G_ba(fake_b), G_ab(fake_a), two discriminator passes with updated D.
  const std::uint64_t generator = f.encoder + f.translator + f.decoder;
  return 4 * generator + 6 * f.image_discriminator;
}

std::uint64_t count_flops(const ArchSpec& arch, ModelKind model, Phase phase, bool use_dev_term_b) {
  if (phase == Phase::inference) {
    const ForwardMacs f = forward_macs(arch);
    return 2 * (f.encoder + f.translator + f.decoder);
  }
  return 3 * 2 * train_step_forward_macs(arch, model, use_dev_term_b);
}

}  // namespace devgan
