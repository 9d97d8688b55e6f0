#pragma once

// One optimisation step for each model, and the epoch loop that drives them.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "devgan/config.hpp"
#include "devgan/data.hpp"
#include "devgan/networks.hpp"

namespace devgan {

/// Loss values are unweighted. loss_cyclic is the mean of the A and B
/// reconstruction terms (baseline: the two cycle-consistency terms); the
/// baseline's adversarial fields are means over its two directions.
struct StepReport {
  std::uint64_t step_index = 0;
  double loss_cyclic = 0.0;
  double loss_dev_a = 0.0;
  double loss_dev_b = 0.0;
  double loss_adv_gen = 0.0;
  double loss_adv_disc = 0.0;
  double wall_time_ms = 0.0;
  /// 6x the forward conv MACs the step executed (see count_flops).
  std::uint64_t flops = 0;
};

/// Bitwise equality of every loss field and the flop count; wall time is
/// ignored.
bool same_losses(const StepReport& a, const StepReport& b);

struct StepOptions {
  /// Check gradient-map key sets against loss_scope().
  bool audit = false;
};

/// Discriminator update on real B encodings vs detached translated A
/// encodings, then one Adam step for encoder+decoder (cyclic loss on both
/// batches) and one for the translator (deviation + adversarial).
StepReport train_step_proposed(Model& m, const Tensor& batch_a, const Tensor& batch_b, const TrainConfig& cfg,
                               std::uint64_t step_index, StepOptions opt = {});

/// Two image-space discriminators, then both generators on cycle
/// consistency in both directions plus the adversarial terms.
StepReport train_step_baseline(Model& m, const Tensor& batch_a, const Tensor& batch_b, const TrainConfig& cfg,
                               std::uint64_t step_index, StepOptions opt = {});

StepReport train_step(Model& m, const Tensor& batch_a, const Tensor& batch_b, const TrainConfig& cfg,
                      std::uint64_t step_index, StepOptions opt = {});

/// Position in the run: `epoch` epochs completed plus `step_in_epoch` steps
/// of the next one.
struct Progress {
  std::uint64_t epoch = 0;
  std::uint64_t step_in_epoch = 0;
  std::uint64_t global_step = 0;

  friend bool operator==(const Progress&, const Progress&) = default;
};

struct TrainState {
  TrainConfig cfg;
  Model model;
  Progress progress;
};

TrainState fresh_state(const TrainConfig& cfg);

struct EpochSummary {
  std::uint64_t epoch = 0;  // 1-based
  double wall_seconds = 0.0;
  std::uint64_t steps = 0;
  double loss_cyclic = 0.0;
  double loss_dev_a = 0.0;
  double loss_dev_b = 0.0;
  double loss_adv_gen = 0.0;
  double loss_adv_disc = 0.0;
  /// Mean |translate(E(b)) - E(b)| over the held-out B set; NaN if none.
  double b_deviation = 0.0;
};

/// Steps through epochs of one run. Batch order depends only on (seed,
/// epoch), so a run resumed from any step continues the same sequence.
class Trainer {
 public:
  Trainer(TrainState& state, const ImageSet& domain_a, const ImageSet& domain_b,
          const ImageSet* held_out_b = nullptr);

  bool done() const;
  std::size_t steps_per_epoch() const { return steps_per_epoch_; }

  /// Runs one step; throws if done().
  StepReport step();
  /// Finishes the current epoch. The summary covers every step of the epoch
  /// this Trainer ran, including ones taken through step().
  EpochSummary run_epoch();

  std::function<void(const StepReport&)> on_step;

 private:
  void begin_epoch();

  TrainState& state_;
  const ImageSet& a_;
  const ImageSet& b_;
  const ImageSet* held_out_b_;
  std::size_t steps_per_epoch_;
  std::vector<BatchIndices> batches_;
  std::uint64_t batches_epoch_ = ~std::uint64_t{0};
  double epoch_seconds_ = 0.0;
  StepReport sums_{};
};

/// Inference path for A images: decode(translate(encode(x))) for the
/// proposed model, the A->B generator for the baseline. `images` is
/// [N,3,S,S]; processed one image at a time.
Tensor translate_images(Model& m, const Tensor& images);

/// Mean absolute change the translator makes to the encodings of `images`.
double translator_deviation(Model& m, const ImageSet& images);

/// CSV helpers with fixed headers (documented in docs/csv.md).
void write_step_header(std::ostream& out);
void write_step_row(std::ostream& out, std::uint64_t epoch, const StepReport& r);
void write_epoch_header(std::ostream& out);
void write_epoch_row(std::ostream& out, const EpochSummary& s);

struct TrainResult {
  std::vector<EpochSummary> epochs;
  std::uint64_t steps = 0;
};

/// Loads trainA/trainB (and testB if present) from cfg.data_root, runs the
/// remaining epochs of `state`, appends CSV rows, checkpoints every
/// cfg.checkpoint_every epochs and at the end. `on_epoch` sees each summary.
TrainResult train_epochs(TrainState& state, const std::function<void(const EpochSummary&)>& on_epoch = {});

}  // namespace devgan
