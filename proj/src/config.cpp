#include "devgan/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "devgan/error.hpp"

namespace devgan {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorCode::config_value,
              std::string(key) + ": invalid value '" + std::string(value) + "' (expected " + std::string(want) + ")");
}

template <class T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true|false");
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Field {
  std::string_view key;
  std::function<void(TrainConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <class T>
Field uint_field(std::string_view key, T TrainConfig::*member) {
  return {key, [member](TrainConfig& c, std::string_view k, std::string_view v) { c.*member = parse_uint<T>(k, v); },
          [member](const TrainConfig& c) { return std::to_string(c.*member); }};
}

Field arch_field(std::string_view key, std::size_t ArchSpec::*member) {
  return {key,
          [member](TrainConfig& c, std::string_view k, std::string_view v) {
            c.arch.*member = parse_uint<std::size_t>(k, v);
          },
          [member](const TrainConfig& c) { return std::to_string(c.arch.*member); }};
}

template <class S>
Field double_field(std::string_view key, S TrainConfig::*group, double S::*member) {
  return {key,
          [group, member](TrainConfig& c, std::string_view k, std::string_view v) {
            (c.*group).*member = parse_double(k, v);
          },
          [group, member](const TrainConfig& c) { return fmt((c.*group).*member); }};
}

Field string_field(std::string_view key, std::string TrainConfig::*member) {
  return {key,
          [member](TrainConfig& c, std::string_view k, std::string_view v) {
            if (v.empty()) bad_value(k, v, "a non-empty path");
            c.*member = std::string(v);
          },
          [member](const TrainConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"model", [](TrainConfig& c, auto, std::string_view v) { c.model = parse_model(v); },
       [](const TrainConfig& c) { return std::string(model_name(c.model)); }},
      uint_field("seed", &TrainConfig::seed),
      uint_field("epochs", &TrainConfig::epochs),
      uint_field("batch_size", &TrainConfig::batch_size),
      arch_field("arch.image_size", &ArchSpec::image_size),
      arch_field("arch.base_channels", &ArchSpec::base_channels),
      arch_field("arch.encoder_downsamples", &ArchSpec::encoder_downsamples),
      arch_field("arch.translator_resblocks", &ArchSpec::translator_resblocks),
      arch_field("arch.disc_layers", &ArchSpec::disc_layers),
      double_field("weights.lambda_cyc", &TrainConfig::weights, &LossWeights::lambda_cyc),
      double_field("weights.lambda_dev_a", &TrainConfig::weights, &LossWeights::lambda_dev_a),
      double_field("weights.lambda_dev_b", &TrainConfig::weights, &LossWeights::lambda_dev_b),
      double_field("weights.lambda_adv", &TrainConfig::weights, &LossWeights::lambda_adv),
      {"weights.use_dev_term_b",
       [](TrainConfig& c, std::string_view k, std::string_view v) { c.weights.use_dev_term_b = parse_bool(k, v); },
       [](const TrainConfig& c) { return std::string(c.weights.use_dev_term_b ? "true" : "false"); }},
      {"weights.adv_mode", [](TrainConfig& c, auto, std::string_view v) { c.weights.adv_mode = parse_adv_mode(v); },
       [](const TrainConfig& c) { return std::string(adv_mode_name(c.weights.adv_mode)); }},
      {"weights.distance", [](TrainConfig& c, auto, std::string_view v) { c.weights.distance = parse_distance(v); },
       [](const TrainConfig& c) { return std::string(distance_name(c.weights.distance)); }},
      double_field("optimizer.lr", &TrainConfig::optimizer, &AdamConfig::lr),
      double_field("optimizer.beta1", &TrainConfig::optimizer, &AdamConfig::beta1),
      double_field("optimizer.beta2", &TrainConfig::optimizer, &AdamConfig::beta2),
      double_field("optimizer.eps", &TrainConfig::optimizer, &AdamConfig::eps),
      string_field("data.root", &TrainConfig::data_root),
      string_field("output.steps_csv", &TrainConfig::steps_csv),
      string_field("output.epochs_csv", &TrainConfig::epochs_csv),
      string_field("output.checkpoint", &TrainConfig::checkpoint_path),
      uint_field("checkpoint.every", &TrainConfig::checkpoint_every),
      uint_field("audit.every", &TrainConfig::audit_every),
      {"bench.recon_threshold",
       [](TrainConfig& c, std::string_view k, std::string_view v) { c.recon_threshold = parse_double(k, v); },
       [](const TrainConfig& c) { return fmt(c.recon_threshold); }},
  };
  return table;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::config_value, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::config_value, "batch_size must be >= 1");
  if (!(recon_threshold > 0.0)) throw Error(ErrorCode::config_value, "bench.recon_threshold must be > 0");
  try {
    arch.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::config_value, e.what());
  }
  weights.validate();
  optimizer.validate();
}

TrainConfig parse_config(std::string_view text, std::string_view origin) {
  TrainConfig cfg;
  std::set<std::string_view> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no) + ": ";
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::config_parse, where + "expected key=value, got '" + std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (f.key == key) field = &f;
    }
    if (field == nullptr) throw Error(ErrorCode::config_parse, where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(field->key).second) {
      throw Error(ErrorCode::config_parse, where + "duplicate key '" + std::string(key) + "'");
    }
    try {
      field->set(cfg, key, value);
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += '=';
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace devgan
