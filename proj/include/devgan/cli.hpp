#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "devgan/config.hpp"

namespace devgan {

/// Entry point for the devgan binary. Errors are reported on `err` as one
/// line: "devgan: error[<code>]: <message>". Returns 0 on success.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct BenchRow {
  std::string model;
  std::uint64_t epoch = 0;
  double wall_seconds = 0.0;
  std::uint64_t train_step_flops = 0;
  std::uint64_t params = 0;
  double recon_l1 = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;  // interleaved proposed, baseline per epoch
  double proposed_seconds = 0.0;
  double baseline_seconds = 0.0;
  std::uint64_t proposed_flops = 0;
  std::uint64_t baseline_flops = 0;
  std::uint64_t proposed_params = 0;
  std::uint64_t baseline_params = 0;
  std::optional<std::uint64_t> proposed_epochs_to_threshold;
  std::optional<std::uint64_t> baseline_epochs_to_threshold;

  double speedup() const { return baseline_seconds / proposed_seconds; }
  double flop_ratio() const {
    return static_cast<double>(baseline_flops) / static_cast<double>(proposed_flops);
  }
};

/// Trains both models for `epochs` epochs on cfg.data_root with cfg's seed
/// and arch, alternating one proposed epoch with one baseline epoch.
BenchReport run_bench(const TrainConfig& cfg, std::size_t epochs, std::ostream* progress = nullptr);

/// CSV with header
/// model,epoch,wall_seconds,train_step_flops,params,recon_l1,epochs_to_threshold,speedup,flop_ratio
void write_bench_csv(const BenchReport& r, std::ostream& out);

}  // namespace devgan
