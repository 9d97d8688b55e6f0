#include "devgan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "devgan/error.hpp"

namespace devgan {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f64s(std::span<const double> v) { bytes(v.data(), v.size() * 8); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::checkpoint_truncated, "checkpoint ends early");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (in_.size() - pos_ < n) throw Error(ErrorCode::checkpoint_truncated, "checkpoint ends early");
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void f64s(std::span<double> v) { bytes(v.data(), v.size() * 8); }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const TrainState& s) {
  Writer w;
  w.bytes(kCheckpointMagic, 8);
  const std::string cfg = serialize_config(s.cfg);
  w.u64(cfg.size());
  w.bytes(cfg.data(), cfg.size());
  w.u64(s.progress.epoch);
  w.u64(s.progress.step_in_epoch);
  w.u64(s.progress.global_step);
  const auto& nets = s.model.networks();
  w.u32(static_cast<std::uint32_t>(nets.size()));
  for (const NetworkParams& n : nets) {
    w.str(n.name());
    w.u32(static_cast<std::uint32_t>(n.params().size()));
    for (const ParamTensor& p : n.params()) {
      w.str(p.name);
      w.u32(static_cast<std::uint32_t>(p.value.rank()));
      for (std::size_t d : p.value.shape()) w.u64(d);
      w.u64(p.step_count);
      w.f64s(p.value.data());
      w.f64s(p.moment1);
      w.f64s(p.moment2);
    }
  }
  w.u64(fnv1a64(w.data()));
  return std::move(w.data());
}

TrainState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw Error(ErrorCode::checkpoint_magic, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < 16) throw Error(ErrorCode::checkpoint_truncated, "checkpoint ends early");
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (fnv1a64(body) != stored) throw Error(ErrorCode::checkpoint_checksum, "checkpoint checksum mismatch");

  Reader r(body.subspan(8));
  const std::uint64_t cfg_len = r.u64();
  if (cfg_len > body.size()) throw Error(ErrorCode::checkpoint_truncated, "checkpoint ends early");
  std::string cfg_text(cfg_len, '\0');
  r.bytes(cfg_text.data(), cfg_len);
  TrainState s;
  s.cfg = parse_config(cfg_text, "<checkpoint config>");
  s.progress.epoch = r.u64();
  s.progress.step_in_epoch = r.u64();
  s.progress.global_step = r.u64();
  s.model = init_model(s.cfg.arch, s.cfg.model, s.cfg.seed);

  std::vector<bool> seen(s.model.networks().size(), false);
  const std::uint32_t n_nets = r.u32();
  for (std::uint32_t k = 0; k < n_nets; ++k) {
    const std::string name = r.str();
    if (!s.model.has(name)) {
      throw Error(ErrorCode::checkpoint_shape, "checkpoint has network " + name + " not present in a " +
                                                   std::string(model_name(s.cfg.model)) + " model");
    }
    NetworkParams& net = s.model.network(name);
    const std::uint32_t n_params = r.u32();
    if (n_params != net.params().size()) {
      throw Error(ErrorCode::checkpoint_shape, "network " + name + " has " + std::to_string(n_params) +
                                                   " parameters, config implies " +
                                                   std::to_string(net.params().size()));
    }
    for (std::uint32_t j = 0; j < n_params; ++j) {
      const std::string pname = r.str();
      if (!net.contains(pname)) throw Error(ErrorCode::checkpoint_shape, "unexpected parameter " + pname);
      ParamTensor& p = net.at(pname);
      Shape shape(r.u32());
      for (std::size_t& d : shape) d = r.u64();
      if (shape != p.value.shape()) {
        throw Error(ErrorCode::checkpoint_shape, pname + ": stored shape " + shape_str(shape) +
                                                     " but config implies " + shape_str(p.value.shape()));
      }
      p.step_count = r.u64();
      r.f64s(p.value.data());
      r.f64s(p.moment1);
      r.f64s(p.moment2);
    }
    for (std::size_t i = 0; i < s.model.networks().size(); ++i) {
      if (s.model.networks()[i].name() == name) seen[i] = true;
    }
  }
  if (!r.at_end()) throw Error(ErrorCode::checkpoint_shape, "trailing bytes after the last network");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw Error(ErrorCode::checkpoint_missing_network,
                  "checkpoint lacks network " + s.model.networks()[i].name());
    }
  }
  return s;
}

void save_checkpoint(const TrainState& state, const fs::path& path) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(state);
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, "failed writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot move checkpoint into " + path.string() + ": " + ec.message());
}

TrainState load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace devgan
