#pragma once

// Training configuration and its line-oriented key=value file format.
//
//   # comment
//   model=proposed
//   arch.base_channels=32
//
// Every key is optional; unknown and repeated keys are errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "devgan/losses.hpp"
#include "devgan/networks.hpp"
#include "devgan/optim.hpp"

namespace devgan {

struct TrainConfig {
  ModelKind model = ModelKind::proposed;
  std::uint64_t seed = 1;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  ArchSpec arch;
  LossWeights weights;
  AdamConfig optimizer;
  /// Holds trainA/, trainB/ and optionally testA/, testB/.
  std::string data_root = "data";
  std::string steps_csv = "run/steps.csv";
  std::string epochs_csv = "run/epochs.csv";
  std::string checkpoint_path = "run/checkpoint.bin";
  /// Also checkpoint after every k-th epoch; 0 = only at the end.
  std::size_t checkpoint_every = 0;
  /// Gradient-scope audit interval in steps; 0 disables it.
  std::size_t audit_every = 100;
  /// Reconstruction L1 used for the epochs-to-threshold report.
  double recon_threshold = 0.1;

  /// Throws ErrorCode::config_value.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws ErrorCode::config_parse (syntax, unknown key; message names
/// `origin:line`) or ErrorCode::config_value (bad value).
TrainConfig parse_config(std::string_view text, std::string_view origin = "<config>");
/// Throws ErrorCode::io naming the path if it cannot be read.
TrainConfig load_config(const std::filesystem::path& path);
/// Every key in a fixed order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace devgan
