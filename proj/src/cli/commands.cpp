#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "devgan/checkpoint.hpp"
#include "devgan/cli.hpp"
#include "devgan/data.hpp"
#include "devgan/error.hpp"
#include "devgan/gradcheck.hpp"
#include "devgan/ops.hpp"
#include "devgan/training.hpp"

namespace devgan {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

void print_epoch(std::ostream& out, std::string_view model, const EpochSummary& s) {
  out << model << " epoch=" << s.epoch << " seconds=" << fixed(s.wall_seconds, 3) << " steps=" << s.steps
      << " loss_cyclic=" << fixed(s.loss_cyclic, 6) << " loss_dev_a=" << fixed(s.loss_dev_a, 6)
      << " loss_dev_b=" << fixed(s.loss_dev_b, 6) << " loss_adv_gen=" << fixed(s.loss_adv_gen, 6)
      << " loss_adv_disc=" << fixed(s.loss_adv_disc, 6);
  if (std::isfinite(s.b_deviation)) out << " b_deviation=" << fixed(s.b_deviation, 6);
  out << '\n' << std::flush;
}

std::uint64_t total_params(const Model& m) {
  std::uint64_t n = 0;
  for (const NetworkParams& net : m.networks()) n += net.count();
  return n;
}

struct GenArgs {
  std::string out;
  SynthSpec spec;
};

int cmd_gen_data(const GenArgs& a, std::ostream& out) {
  const Manifest m = generate_synthetic(a.spec, a.out);
  out << "wrote " << m.size() << " images and manifest.csv to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string model;
  std::string resume;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = load_config(a.config);
  if (!a.model.empty()) cfg.model = parse_model(a.model);
  TrainState state;
  if (!a.resume.empty()) {
    state = load_checkpoint(a.resume);
    if (state.cfg.model != cfg.model) {
      throw Error(ErrorCode::model_mismatch, "checkpoint " + a.resume + " holds a " +
                                                 std::string(model_name(state.cfg.model)) + " model, but " +
                                                 std::string(model_name(cfg.model)) + " was requested");
    }
    if (!(state.cfg.arch == cfg.arch) || state.cfg.seed != cfg.seed || !(state.cfg.weights == cfg.weights) ||
        !(state.cfg.optimizer == cfg.optimizer) || state.cfg.batch_size != cfg.batch_size) {
      throw Error(ErrorCode::model_mismatch, "checkpoint " + a.resume +
                                                 " was trained with a different arch, seed, batch size, loss "
                                                 "weights or optimizer than the config");
    }
    state.cfg = cfg;
  } else {
    state = fresh_state(cfg);
  }
  const std::string name(model_name(cfg.model));
  const TrainResult r = train_epochs(state, [&](const EpochSummary& s) { print_epoch(out, name, s); });
  out << name << " done: " << r.steps << " steps, checkpoint " << cfg.checkpoint_path << '\n';
  return 0;
}

struct TranslateArgs {
  std::string checkpoint;
  std::string input;
  std::string output;
  bool pass_through_b = false;
};

int cmd_translate(const TranslateArgs& a, std::ostream& out) {
  TrainState state = load_checkpoint(a.checkpoint);
  const ImageSet images = load_image_dir(a.input);
  const std::string suffix = a.pass_through_b ? "_passB" : "_fakeB";
  double l1 = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::size_t idx[] = {i};
    const Tensor x = stack_images(images, idx);
    const Tensor y = translate_images(state.model, x);
    save_image(y, fs::path(a.output) / (fs::path(images.names[i]).stem().string() + suffix + ".ppm"));
    double sum = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) sum += std::abs(x[k] - y[k]);
    l1 += sum / static_cast<double>(x.size());
  }
  out << "translated " << images.size() << " images into " << a.output;
  if (a.pass_through_b) out << " mean_l1=" << fixed(l1 / static_cast<double>(images.size()), 6);
  out << '\n';
  return 0;
}

struct BenchArgs {
  std::string config;
  std::size_t epochs = 3;
  std::string out = "bench.csv";
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  const TrainConfig cfg = load_config(a.config);
  const BenchReport r = run_bench(cfg, a.epochs, &out);
  fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream csv(path);
  if (!csv) throw Error(ErrorCode::io, "cannot write " + a.out);
  write_bench_csv(r, csv);
  out << "speedup=" << fixed(r.speedup(), 4) << "x flop_ratio=" << fixed(r.flop_ratio(), 4) << " report=" << a.out
      << '\n';
  return 0;
}

int cmd_gradcheck(const std::string& op, std::ostream& out) {
  const auto results = run_gradchecks(default_gradchecks(), op.empty() ? std::nullopt : std::optional(op));
  bool ok = true;
  out << std::left << std::setw(32) << "op" << std::setw(16) << "max_rel_error" << "status\n";
  for (const GradCheckResult& r : results) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << r.max_rel_error;
    out << std::left << std::setw(32) << r.op << std::setw(16) << err.str() << (r.passed ? "PASS" : "FAIL") << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

BenchReport run_bench(const TrainConfig& base, std::size_t epochs, std::ostream* progress) {
  if (epochs < 1) throw Error(ErrorCode::config_value, "bench needs at least one epoch");
  TrainConfig cfg = base;
  cfg.epochs = epochs;
  cfg.audit_every = 0;
  cfg.validate();
  const fs::path root(cfg.data_root);
  const ImageSet a = load_image_dir(root / "trainA");
  const ImageSet b = load_image_dir(root / "trainB");

  TrainConfig pc = cfg, bc = cfg;
  pc.model = ModelKind::proposed;
  bc.model = ModelKind::baseline;
  TrainState ps = fresh_state(pc), bs = fresh_state(bc);
  Trainer pt(ps, a, b), bt(bs, a, b);

  // One untimed step per model on a scratch copy warms caches and the heap.
  {
    const std::size_t first[] = {0};
    const Tensor xa = stack_images(a, first), xb = stack_images(b, first);
    Model pw = ps.model, bw = bs.model;
    train_step(pw, xa, xb, pc, 0);
    train_step(bw, xa, xb, bc, 0);
  }

  BenchReport r;
  r.proposed_flops = count_flops(cfg.arch, ModelKind::proposed, Phase::train_step, cfg.weights.use_dev_term_b);
  r.baseline_flops = count_flops(cfg.arch, ModelKind::baseline, Phase::train_step, cfg.weights.use_dev_term_b);
  r.proposed_params = total_params(ps.model);
  r.baseline_params = total_params(bs.model);
  for (std::size_t e = 0; e < epochs; ++e) {
    for (bool proposed : {true, false}) {
      Trainer& t = proposed ? pt : bt;
      const EpochSummary s = t.run_epoch();
      BenchRow row{proposed ? "proposed" : "baseline",
                   s.epoch,
                   s.wall_seconds,
                   proposed ? r.proposed_flops : r.baseline_flops,
                   proposed ? r.proposed_params : r.baseline_params,
                   s.loss_cyclic};
      (proposed ? r.proposed_seconds : r.baseline_seconds) += s.wall_seconds;
      auto& reached = proposed ? r.proposed_epochs_to_threshold : r.baseline_epochs_to_threshold;
      if (!reached && s.loss_cyclic <= cfg.recon_threshold) reached = s.epoch;
      if (progress != nullptr) print_epoch(*progress, row.model, s);
      r.rows.push_back(row);
    }
  }
  return r;
}

void write_bench_csv(const BenchReport& r, std::ostream& out) {
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : std::string("none"); };
  out << "model,epoch,wall_seconds,train_step_flops,params,recon_l1,epochs_to_threshold,speedup,flop_ratio\n";
  for (const BenchRow& row : r.rows) {
    out << row.model << ',' << row.epoch << ',' << fixed(row.wall_seconds, 6) << ',' << row.train_step_flops << ','
        << row.params << ',' << fixed(row.recon_l1, 6) << ",,,\n";
  }
  out << "proposed,total," << fixed(r.proposed_seconds, 6) << ',' << r.proposed_flops << ',' << r.proposed_params
      << ",," << opt(r.proposed_epochs_to_threshold) << ",,\n";
  out << "baseline,total," << fixed(r.baseline_seconds, 6) << ',' << r.baseline_flops << ',' << r.baseline_params
      << ",," << opt(r.baseline_epochs_to_threshold) << ",,\n";
  out << "summary,,,,,,," << fixed(r.speedup(), 4) << ',' << fixed(r.flop_ratio(), 4) << '\n';
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"devgan: unpaired image translation training engine"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic two-domain disk dataset");
  gen_cmd->add_option("--out", gen.out, "Dataset root")->required();
  gen_cmd->add_option("--size", gen.spec.image_size, "Image side in pixels")->capture_default_str();
  gen_cmd->add_option("--count-a", gen.spec.count_a, "trainA images")->capture_default_str();
  gen_cmd->add_option("--count-b", gen.spec.count_b, "trainB images")->capture_default_str();
  gen_cmd->add_option("--test-a", gen.spec.test_a, "testA images")->capture_default_str();
  gen_cmd->add_option("--test-b", gen.spec.test_b, "testB images")->capture_default_str();
  gen_cmd->add_option("--jitter", gen.spec.jitter, "Per-channel disk color jitter")->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed")->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one model from a config file");
  train_cmd->add_option("--config", train.config, "key=value config file")->required();
  train_cmd->add_option("--model", train.model, "Override the config's model")
      ->check(CLI::IsMember({"proposed", "baseline"}));
  train_cmd->add_option("--resume", train.resume, "Checkpoint to continue from");

  TranslateArgs tr;
  auto* tr_cmd = app.add_subcommand("translate", "Translate a directory of PPM images");
  tr_cmd->add_option("--checkpoint", tr.checkpoint, "Trained checkpoint")->required();
  tr_cmd->add_option("--input", tr.input, "Directory of .ppm images")->required();
  tr_cmd->add_option("--output", tr.output, "Output directory")->required();
  tr_cmd->add_flag("--pass-through-b", tr.pass_through_b,
                   "Inputs are domain-B images; write their full-path outputs and report mean L1");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time proposed vs baseline training");
  bench_cmd->add_option("--config", bench.config, "key=value config file")->required();
  bench_cmd->add_option("--epochs", bench.epochs, "Epochs per model")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Report CSV")->capture_default_str();

  std::string op;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every kernel and loss");
  gc_cmd->add_option("--op", op, "Only this op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "devgan: error[usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*tr_cmd) return cmd_translate(tr, out);
    if (*bench_cmd) return cmd_bench(bench, out);
    if (*gc_cmd) return cmd_gradcheck(op, out);
  } catch (const Error& e) {
    err << "devgan: error[" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "devgan: error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace devgan
