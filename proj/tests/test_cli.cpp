#include <algorithm>
#include <iomanip>
#include <sstream>

#include "doctest.h"
#include "devgan/checkpoint.hpp"
#include "devgan/cli.hpp"
#include "devgan/training.hpp"
#include "test_support.hpp"

using namespace devgan;
using testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "devgan");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// One line, "devgan: error[<code>]: ...".
void check_error_line(const Run& r, const std::string& code) {
  CHECK(r.code != 0);
  CHECK(r.err.rfind("devgan: error[" + code + "]: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

struct Workspace {
  TempDir dir;
  fs::path config;
  explicit Workspace(const std::string& name, ModelKind kind = ModelKind::proposed) : dir(name) {
    const Run g = cli({"gen-data", "--out", (dir.path / "data").string(), "--size", "16", "--count-a", "10",
                       "--count-b", "10", "--test-a", "3", "--test-b", "3", "--seed", "4"});
    REQUIRE(g.code == 0);
    write_config(testing::tiny_config(dir.path, kind));
  }
  void write_config(const TrainConfig& c) {
    config = dir.path / "run.cfg";
    std::ofstream(config) << serialize_config(c);
  }
};

}  // namespace

TEST_CASE("gen-data writes the four splits and the manifest") {
  TempDir dir("devgan_test_cli_gen");
  const Run r = cli({"gen-data", "--out", dir.path.string(), "--size", "16", "--count-a", "5", "--count-b", "4",
                     "--test-a", "2", "--test-b", "1"});
  CHECK(r.code == 0);
  CHECK(load_image_dir(dir.path / "trainA").size() == 5);
  CHECK(load_image_dir(dir.path / "trainB").size() == 4);
  CHECK(load_image_dir(dir.path / "testA").size() == 2);
  CHECK(load_image_dir(dir.path / "testB").size() == 1);
  CHECK(read_manifest(dir.path / "manifest.csv").size() == 12);
}

TEST_CASE("one epoch on 10+10 images writes 10 step rows") {
  Workspace w("devgan_test_cli_train");
  const Run r = cli({"train", "--config", w.config.string()});
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(r.out.find("proposed epoch=1 ") != std::string::npos);
  CHECK(r.out.find("loss_cyclic=") != std::string::npos);
  CHECK(testing::count_lines(w.dir.path / "run" / "steps.csv") == 11);
  CHECK(testing::count_lines(w.dir.path / "run" / "epochs.csv") == 2);
  CHECK(fs::exists(w.dir.path / "run" / "checkpoint.bin"));
}

TEST_CASE("train resumes from a checkpoint and appends") {
  Workspace w("devgan_test_cli_resume");
  REQUIRE(cli({"train", "--config", w.config.string()}).code == 0);
  const fs::path ck = w.dir.path / "first.bin";
  fs::copy_file(w.dir.path / "run" / "checkpoint.bin", ck);

  TrainConfig two = testing::tiny_config(w.dir.path, ModelKind::proposed);
  two.epochs = 2;
  w.write_config(two);
  const Run r = cli({"train", "--config", w.config.string(), "--resume", ck.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("epoch=2") != std::string::npos);
  CHECK(r.out.find("epoch=1 ") == std::string::npos);
  CHECK(testing::count_lines(w.dir.path / "run" / "steps.csv") == 21);

  // Same result as a straight two-epoch run.
  TempDir other("devgan_test_cli_resume_ref");
  TrainConfig ref = two;
  ref.steps_csv = other.path / "s.csv";
  ref.epochs_csv = other.path / "e.csv";
  ref.checkpoint_path = other.path / "c.bin";
  TrainState st = fresh_state(ref);
  train_epochs(st);
  const TrainState resumed = load_checkpoint(w.dir.path / "run" / "checkpoint.bin");
  CHECK(resumed.model == st.model);
}

TEST_CASE("resuming a proposed checkpoint as baseline is a mismatch") {
  Workspace w("devgan_test_cli_mismatch");
  REQUIRE(cli({"train", "--config", w.config.string()}).code == 0);
  const Run r = cli({"train", "--config", w.config.string(), "--model", "baseline", "--resume",
                     (w.dir.path / "run" / "checkpoint.bin").string()});
  check_error_line(r, "model_mismatch");
}

TEST_CASE("config and flag errors") {
  TempDir dir("devgan_test_cli_errors");
  const Run missing = cli({"train", "--config", (dir.path / "nope.cfg").string()});
  check_error_line(missing, "io");
  CHECK(missing.err.find("nope.cfg") != std::string::npos);

  std::ofstream(dir.path / "bad.cfg") << "seed=1\narch.width=3\n";
  const Run bad = cli({"train", "--config", (dir.path / "bad.cfg").string()});
  check_error_line(bad, "config_parse");
  CHECK(bad.err.find("bad.cfg:2") != std::string::npos);

  check_error_line(cli({"train", "--config", "x", "--frobnicate"}), "usage");
  check_error_line(cli({"train"}), "usage");
  check_error_line(cli({}), "usage");
  check_error_line(cli({"train", "--config", "x", "--model", "cyclegan"}), "usage");
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("translate writes one suffixed file per input") {
  Workspace w("devgan_test_cli_translate");
  REQUIRE(cli({"train", "--config", w.config.string()}).code == 0);
  const std::string ck = (w.dir.path / "run" / "checkpoint.bin").string();
  const Run r = cli({"translate", "--checkpoint", ck, "--input", (w.dir.path / "data" / "testA").string(), "--output",
                     (w.dir.path / "out").string()});
  CHECK(r.code == 0);
  const ImageSet in = load_image_dir(w.dir.path / "data" / "testA");
  const ImageSet out = load_image_dir(w.dir.path / "out");
  REQUIRE(out.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(out.names[i] == fs::path(in.names[i]).stem().string() + "_fakeB.ppm");
  }

  const Run p = cli({"translate", "--checkpoint", ck, "--input", (w.dir.path / "data" / "testB").string(), "--output",
                     (w.dir.path / "outB").string(), "--pass-through-b"});
  CHECK(p.code == 0);
  CHECK(p.out.find("mean_l1=") != std::string::npos);
  CHECK(load_image_dir(w.dir.path / "outB").names.front().ends_with("_passB.ppm"));

  check_error_line(cli({"translate", "--checkpoint", ck, "--input", (w.dir.path / "none").string(), "--output",
                        (w.dir.path / "o").string()}),
                   "empty_dataset");
}

TEST_CASE("identity translator checkpoint outputs decode(encode(x))") {
  TempDir dir("devgan_test_cli_identity");
  REQUIRE(cli({"gen-data", "--out", (dir.path / "data").string(), "--size", "16", "--count-a", "1", "--count-b", "1",
               "--test-a", "3", "--test-b", "1"})
              .code == 0);
  TrainState st = fresh_state(testing::tiny_config(dir.path, ModelKind::proposed));
  for (ParamTensor& p : st.model.network(net::translator).params()) p.value.fill(0.0);
  save_checkpoint(st, dir.path / "id.bin");
  REQUIRE(cli({"translate", "--checkpoint", (dir.path / "id.bin").string(), "--input",
               (dir.path / "data" / "testA").string(), "--output", (dir.path / "out").string()})
              .code == 0);
  const ImageSet in = load_image_dir(dir.path / "data" / "testA");
  for (std::size_t i = 0; i < in.size(); ++i) {
    Tape t;
    const Shape& s = in.images[i].shape();
    const Var x = t.constant(Tensor(Shape{1, s[0], s[1], s[2]},
                                    std::vector<double>(in.images[i].data().begin(), in.images[i].data().end())));
    const Tensor y = decode(st.model.network(net::decoder), encode(st.model.network(net::encoder), x)).value();
    const Rgb8Image want = to_rgb8(y);
    const Rgb8Image got = read_ppm(dir.path / "out" / (fs::path(in.names[i]).stem().string() + "_fakeB.ppm"));
    CHECK(got.pixels == want.pixels);
  }
}

TEST_CASE("gradcheck command") {
  const Run one = cli({"gradcheck", "--op", "relu"});
  CHECK(one.code == 0);
  CHECK(one.out.find("relu") != std::string::npos);
  CHECK(one.out.find("PASS") != std::string::npos);
  CHECK(one.out.find("conv2d") == std::string::npos);
  check_error_line(cli({"gradcheck", "--op", "softmax"}), "unknown_op");
}

TEST_CASE("bench reports both models and the flop ratio") {
  Workspace w("devgan_test_cli_bench");
  const fs::path out = w.dir.path / "bench.csv";
  const Run r = cli({"bench", "--config", w.config.string(), "--epochs", "2", "--out", out.string()});
  CHECK(r.code == 0);
  std::ifstream f(out);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(line);
  REQUIRE(lines.size() == 8);
  CHECK(lines[0] == "model,epoch,wall_seconds,train_step_flops,params,recon_l1,epochs_to_threshold,speedup,flop_ratio");
  CHECK(lines[1].rfind("proposed,1,", 0) == 0);
  CHECK(lines[2].rfind("baseline,1,", 0) == 0);
  CHECK(lines[3].rfind("proposed,2,", 0) == 0);
  CHECK(lines[4].rfind("baseline,2,", 0) == 0);
  const TrainConfig cfg = testing::tiny_config(w.dir.path, ModelKind::proposed);
  const double ratio = static_cast<double>(count_flops(cfg.arch, ModelKind::baseline, Phase::train_step)) /
                       static_cast<double>(count_flops(cfg.arch, ModelKind::proposed, Phase::train_step));
  std::ostringstream want;
  want << std::fixed << std::setprecision(4) << ratio;
  CHECK(lines[7].rfind("summary,", 0) == 0);
  CHECK(lines[7].ends_with("," + want.str()));
  // speedup printed with 4 decimals.
  const std::string speedup = lines[7].substr(lines[7].rfind(',', lines[7].size() - want.str().size() - 2) + 1);
  CHECK(speedup.find('.') == speedup.find(',') - 5);
}
