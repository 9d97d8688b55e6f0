#include "devgan/training.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

#include "devgan/checkpoint.hpp"
#include "devgan/error.hpp"
#include "devgan/losses.hpp"
#include "devgan/ops.hpp"

namespace devgan {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Evaluates one loss term, tagging any non-finite failure with its name.
template <class F>
Var term(const char* name, F&& build) {
  try {
    Var v = build();
    if (!std::isfinite(v.value().item())) {
      throw Error(ErrorCode::non_finite, std::string("loss term ") + name + " is not finite");
    }
    return v;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::non_finite) throw;
    const std::string msg = e.what();
    if (msg.rfind("loss term ", 0) == 0) throw;
    throw Error(ErrorCode::non_finite, std::string("loss term ") + name + ": " + msg);
  }
}

void check_batches(const Tensor& a, const Tensor& b, const ArchSpec& arch) {
  const Shape want{a.shape().empty() ? 0 : a.dim(0), 3, arch.image_size, arch.image_size};
  if (a.shape() != want || b.shape() != want) {
    throw Error(ErrorCode::shape_mismatch, "batches must both be [N,3," + std::to_string(arch.image_size) + "," +
                                               std::to_string(arch.image_size) + "], got " + shape_str(a.shape()) +
                                               " and " + shape_str(b.shape()));
  }
}

void require_kind(const Model& m, ModelKind kind) {
  if (m.kind() != kind) {
    throw Error(ErrorCode::model_mismatch, "step for " + std::string(model_name(kind)) + " model called on a " +
                                               std::string(model_name(m.kind())) + " model");
  }
}

GradientMap backward(Tape& tape, Var root, const std::vector<ParamTensor*>& params) {
  return tape.backward(root, params);
}

}  // namespace

bool same_losses(const StepReport& a, const StepReport& b) {
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  return a.step_index == b.step_index && bits(a.loss_cyclic) == bits(b.loss_cyclic) &&
         bits(a.loss_dev_a) == bits(b.loss_dev_a) && bits(a.loss_dev_b) == bits(b.loss_dev_b) &&
         bits(a.loss_adv_gen) == bits(b.loss_adv_gen) && bits(a.loss_adv_disc) == bits(b.loss_adv_disc) &&
         a.flops == b.flops;
}

StepReport train_step_proposed(Model& m, const Tensor& batch_a, const Tensor& batch_b, const TrainConfig& cfg,
                               std::uint64_t step_index, StepOptions opt) {
  require_kind(m, ModelKind::proposed);
  check_batches(batch_a, batch_b, m.arch());
  const auto t0 = Clock::now();
  const std::uint64_t macs0 = ops::forward_conv_macs();
  const LossWeights& w = cfg.weights;
  NetworkParams& enc = m.network(net::encoder);
  NetworkParams& dec = m.network(net::decoder);
  NetworkParams& tr = m.network(net::translator);
  NetworkParams& disc = m.network(net::discriminator);
  StepReport rep;
  rep.step_index = step_index;

  Tape tape;
  const Var a = tape.constant(batch_a);
  const Var b = tape.constant(batch_b);
  const Var enc_a = encode(enc, a);
  const Var enc_b = encode(enc, b);
  const Var fake = translate(tr, enc_a);

  // Discriminator: real B encodings vs translated A encodings cut off from
  // the generator side.
  const auto disc_params = scoped_params(m, LossKind::adversarial_discriminator);
  const Var l_disc = term("adversarial_discriminator", [&] {
    return adversarial_discriminator_loss(discriminate(disc, enc_b), discriminate(disc, ops::detach(fake)), w);
  });
  const GradientMap g_disc = backward(tape, l_disc, disc_params);
  if (opt.audit) audit_scope(m, LossKind::adversarial_discriminator, g_disc);
  adam_step(disc_params, g_disc, cfg.optimizer);

  // Encoder + decoder: reconstruction of both domains.
  const Var cyc_a = term("cyclic_a", [&] { return cyclic_loss(a, decode(dec, enc_a), w.distance); });
  const Var cyc_b = term("cyclic_b", [&] { return cyclic_loss(b, decode(dec, enc_b), w.distance); });
  const Var l_autoenc = ops::scale(ops::add(cyc_a, cyc_b), w.lambda_cyc);

  // Translator: deviation on B, adversarial on A against the updated
  // discriminator.
  const Var tr_b = translate(tr, enc_b);
  const Var dev_a = term("deviation_a", [&] { return cyclic_loss(enc_b, tr_b, w.distance); });
  Var dev_b_img;
  if (w.use_dev_term_b) dev_b_img = decode(dec, tr_b);
  const Var l_dev = term("deviation", [&] { return deviation_loss(enc_b, tr_b, b, dev_b_img, w); });
  const Var l_gen = term("adversarial_generator",
                         [&] { return adversarial_generator_loss(discriminate(disc, fake), w); });
  const Var l_translator = ops::add(l_dev, ops::scale(l_gen, w.lambda_adv));

  const auto autoenc_params = scoped_params(m, LossKind::cyclic);
  const auto tr_params = scoped_params(m, LossKind::deviation);
  const GradientMap g_autoenc = backward(tape, l_autoenc, autoenc_params);
  const GradientMap g_tr = backward(tape, l_translator, tr_params);
  if (opt.audit) {
    audit_scope(m, LossKind::cyclic, g_autoenc);
    audit_scope(m, LossKind::deviation, g_tr);
    audit_scope(m, LossKind::adversarial_generator, backward(tape, l_gen, tr_params));
  }
  adam_step(autoenc_params, g_autoenc, cfg.optimizer);
  adam_step(tr_params, g_tr, cfg.optimizer);

  rep.loss_cyclic = 0.5 * (cyc_a.value().item() + cyc_b.value().item());
  rep.loss_dev_a = dev_a.value().item();
  rep.loss_dev_b = w.use_dev_term_b ? cyclic_loss(b, dev_b_img, w.distance).value().item() : 0.0;
  rep.loss_adv_gen = l_gen.value().item();
  rep.loss_adv_disc = l_disc.value().item();
  rep.flops = 6 * (ops::forward_conv_macs() - macs0);
  rep.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return rep;
}

StepReport train_step_baseline(Model& m, const Tensor& batch_a, const Tensor& batch_b, const TrainConfig& cfg,
                               std::uint64_t step_index, StepOptions opt) {
  require_kind(m, ModelKind::baseline);
  check_batches(batch_a, batch_b, m.arch());
  (void)opt;
  const auto t0 = Clock::now();
  const std::uint64_t macs0 = ops::forward_conv_macs();
  const LossWeights& w = cfg.weights;
  NetworkParams& g_ba = m.network(net::translator_b2a);
  NetworkParams& d_a = m.network(net::discriminator_a);
  NetworkParams& d_b = m.network(net::discriminator_b);
  StepReport rep;
  rep.step_index = step_index;

  Tape tape;
  const Var a = tape.constant(batch_a);
  const Var b = tape.constant(batch_b);
  const Var fake_b = generate_a2b(m, a);
  const Var fake_a = generate_b2a(g_ba, b);

  const auto disc_params = m.params_of({net::discriminator_a, net::discriminator_b});
  const Var l_disc_b = term("adversarial_discriminator_b", [&] {
    return adversarial_discriminator_loss(discriminate(d_b, b), discriminate(d_b, ops::detach(fake_b)), w);
  });
  const Var l_disc_a = term("adversarial_discriminator_a", [&] {
    return adversarial_discriminator_loss(discriminate(d_a, a), discriminate(d_a, ops::detach(fake_a)), w);
  });
  const Var l_disc = ops::add(l_disc_a, l_disc_b);
  adam_step(disc_params, backward(tape, l_disc, disc_params), cfg.optimizer);

  const Var cyc_a = term("cycle_a", [&] { return cyclic_loss(a, generate_b2a(g_ba, fake_b), w.distance); });
  const Var cyc_b = term("cycle_b", [&] { return cyclic_loss(b, generate_a2b(m, fake_a), w.distance); });
  const Var gen_b = term("adversarial_generator_b", [&] { return adversarial_generator_loss(discriminate(d_b, fake_b), w); });
  const Var gen_a = term("adversarial_generator_a", [&] { return adversarial_generator_loss(discriminate(d_a, fake_a), w); });
  const Var l_gen = ops::add(ops::scale(ops::add(cyc_a, cyc_b), w.lambda_cyc),
                             ops::scale(ops::add(gen_a, gen_b), w.lambda_adv));
  const auto gen_params = m.params_of({net::encoder, net::translator, net::decoder, net::translator_b2a});
  adam_step(gen_params, backward(tape, l_gen, gen_params), cfg.optimizer);

  rep.loss_cyclic = 0.5 * (cyc_a.value().item() + cyc_b.value().item());
  rep.loss_adv_gen = 0.5 * (gen_a.value().item() + gen_b.value().item());
  rep.loss_adv_disc = 0.5 * l_disc.value().item();
  rep.flops = 6 * (ops::forward_conv_macs() - macs0);
  rep.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  return rep;
}

StepReport train_step(Model& m, const Tensor& batch_a, const Tensor& batch_b, const TrainConfig& cfg,
                      std::uint64_t step_index, StepOptions opt) {
  return m.kind() == ModelKind::proposed ? train_step_proposed(m, batch_a, batch_b, cfg, step_index, opt)
                                         : train_step_baseline(m, batch_a, batch_b, cfg, step_index, opt);
}

TrainState fresh_state(const TrainConfig& cfg) {
  cfg.validate();
  return TrainState{cfg, init_model(cfg.arch, cfg.model, cfg.seed), Progress{}};
}

Trainer::Trainer(TrainState& state, const ImageSet& domain_a, const ImageSet& domain_b, const ImageSet* held_out_b)
    : state_(state), a_(domain_a), b_(domain_b), held_out_b_(held_out_b) {
  if (a_.size() == 0 || b_.size() == 0) throw Error(ErrorCode::empty_dataset, "both domains need images");
  const std::size_t n = std::min(a_.size(), b_.size());
  const std::size_t bs = state_.cfg.batch_size;
  steps_per_epoch_ = (n + bs - 1) / bs;
  if (state_.progress.step_in_epoch >= steps_per_epoch_) {
    throw Error(ErrorCode::invalid_argument, "resume position lies beyond the epoch length of this dataset");
  }
}

bool Trainer::done() const { return state_.progress.epoch >= state_.cfg.epochs; }

void Trainer::begin_epoch() {
  if (batches_epoch_ == state_.progress.epoch) return;
  batches_ = epoch_batches(a_.size(), b_.size(), state_.cfg.batch_size,
                           epoch_seed(state_.cfg.seed, state_.progress.epoch));
  batches_epoch_ = state_.progress.epoch;
}

StepReport Trainer::step() {
  if (done()) throw Error(ErrorCode::invalid_argument, "training already finished");
  begin_epoch();
  Progress& p = state_.progress;
  if (p.step_in_epoch == 0) {
    epoch_seconds_ = 0.0;
    sums_ = {};
  }
  const BatchIndices& idx = batches_[p.step_in_epoch];
  const TrainConfig& cfg = state_.cfg;
  StepOptions opt;
  opt.audit = cfg.audit_every > 0 && p.global_step % cfg.audit_every == 0;
  const StepReport r = train_step(state_.model, stack_images(a_, idx.a), stack_images(b_, idx.b), cfg,
                                  p.global_step, opt);
  ++p.global_step;
  if (++p.step_in_epoch == steps_per_epoch_) {
    p.step_in_epoch = 0;
    ++p.epoch;
  }
  epoch_seconds_ += r.wall_time_ms / 1000.0;
  sums_.loss_cyclic += r.loss_cyclic;
  sums_.loss_dev_a += r.loss_dev_a;
  sums_.loss_dev_b += r.loss_dev_b;
  sums_.loss_adv_gen += r.loss_adv_gen;
  sums_.loss_adv_disc += r.loss_adv_disc;
  ++sums_.step_index;
  if (on_step) on_step(r);
  return r;
}

EpochSummary Trainer::run_epoch() {
  const std::uint64_t epoch = state_.progress.epoch;
  while (!done() && state_.progress.epoch == epoch) step();
  EpochSummary s;
  s.epoch = epoch + 1;
  s.steps = sums_.step_index;
  s.wall_seconds = epoch_seconds_;
  const double n = s.steps > 0 ? static_cast<double>(s.steps) : 1.0;
  s.loss_cyclic = sums_.loss_cyclic / n;
  s.loss_dev_a = sums_.loss_dev_a / n;
  s.loss_dev_b = sums_.loss_dev_b / n;
  s.loss_adv_gen = sums_.loss_adv_gen / n;
  s.loss_adv_disc = sums_.loss_adv_disc / n;
  s.b_deviation = held_out_b_ != nullptr ? translator_deviation(state_.model, *held_out_b_)
                                         : std::numeric_limits<double>::quiet_NaN();
  return s;
}

Tensor translate_images(Model& m, const Tensor& images) {
  const Shape& s = images.shape();
  if (s.size() != 4) throw Error(ErrorCode::shape_mismatch, "translate_images expects [N,3,S,S]");
  const std::size_t per = s[1] * s[2] * s[3];
  Tensor out(s);
  for (std::size_t n = 0; n < s[0]; ++n) {
    Tape tape;
    const Var x = tape.constant(Tensor(Shape{1, s[1], s[2], s[3]},
                                       std::vector<double>(images.ptr() + n * per, images.ptr() + (n + 1) * per)));
    const Var y = generate_a2b(m, x);
    std::copy(y.value().ptr(), y.value().ptr() + per, out.ptr() + n * per);
  }
  return out;
}

double translator_deviation(Model& m, const ImageSet& images) {
  double total = 0.0;
  for (const Tensor& img : images.images) {
    Tape tape;
    const Shape& s = img.shape();
    const Var x = tape.constant(Tensor(Shape{1, s[0], s[1], s[2]}, std::vector<double>(img.data().begin(), img.data().end())));
    const Var e = encode(m.network(net::encoder), x);
    total += ops::l1_loss(translate(m.network(net::translator), e), e).value().item();
  }
  return images.size() > 0 ? total / static_cast<double>(images.size()) : 0.0;
}

void write_step_header(std::ostream& out) {
  out << "step,epoch,loss_cyclic,loss_dev_a,loss_dev_b,loss_adv_gen,loss_adv_disc,wall_time_ms,flops\n";
}

void write_step_row(std::ostream& out, std::uint64_t epoch, const StepReport& r) {
  out << std::setprecision(17) << r.step_index << ',' << epoch << ',' << r.loss_cyclic << ',' << r.loss_dev_a
      << ',' << r.loss_dev_b << ',' << r.loss_adv_gen << ',' << r.loss_adv_disc << ',' << std::setprecision(6)
      << r.wall_time_ms << ',' << r.flops << '\n';
}

void write_epoch_header(std::ostream& out) {
  out << "epoch,wall_seconds,steps,loss_cyclic,loss_dev_a,loss_dev_b,loss_adv_gen,loss_adv_disc,b_deviation\n";
}

void write_epoch_row(std::ostream& out, const EpochSummary& s) {
  out << s.epoch << ',' << std::setprecision(6) << s.wall_seconds << ',' << s.steps << ',' << std::setprecision(17)
      << s.loss_cyclic << ',' << s.loss_dev_a << ',' << s.loss_dev_b << ',' << s.loss_adv_gen << ','
      << s.loss_adv_disc << ',' << s.b_deviation << '\n';
}

namespace {

std::ofstream open_csv(const fs::path& path, bool append, void (*header)(std::ostream&)) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const bool fresh = !append || !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  if (fresh) header(out);
  return out;
}

}  // namespace

TrainResult train_epochs(TrainState& state, const std::function<void(const EpochSummary&)>& on_epoch) {
  const TrainConfig& cfg = state.cfg;
  cfg.validate();
  const fs::path root(cfg.data_root);
  const ImageSet a = load_image_dir(root / "trainA");
  const ImageSet b = load_image_dir(root / "trainB");
  std::optional<ImageSet> test_b;
  std::error_code ec;
  if (fs::is_directory(root / "testB", ec)) test_b = load_image_dir(root / "testB");

  const bool resuming = state.progress.global_step > 0;
  std::ofstream steps_csv = open_csv(cfg.steps_csv, resuming, write_step_header);
  std::ofstream epochs_csv = open_csv(cfg.epochs_csv, resuming, write_epoch_header);

  Trainer trainer(state, a, b, test_b ? &*test_b : nullptr);
  trainer.on_step = [&](const StepReport& r) {
    const std::uint64_t epoch = state.progress.step_in_epoch == 0 ? state.progress.epoch : state.progress.epoch + 1;
    write_step_row(steps_csv, epoch, r);
  };
  TrainResult result;
  while (!trainer.done()) {
    const EpochSummary s = trainer.run_epoch();
    result.steps += s.steps;
    write_epoch_row(epochs_csv, s);
    steps_csv.flush();
    epochs_csv.flush();
    if (on_epoch) on_epoch(s);
    result.epochs.push_back(s);
    if (cfg.checkpoint_every > 0 && state.progress.epoch % cfg.checkpoint_every == 0 && !trainer.done()) {
      save_checkpoint(state, cfg.checkpoint_path);
    }
  }
  save_checkpoint(state, cfg.checkpoint_path);
  return result;
}

}  // namespace devgan
