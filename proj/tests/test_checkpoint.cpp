#include <algorithm>
#include <cstring>

#include "doctest.h"
#include "devgan/checkpoint.hpp"
#include "devgan/error.hpp"
#include "test_support.hpp"

using namespace devgan;
using testing::TempDir;

namespace {

ErrorCode decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a checkpoint error");
  return ErrorCode::invalid_argument;
}

TrainState trained_state(const std::filesystem::path& root, ModelKind kind, std::size_t steps) {
  TrainConfig cfg = testing::tiny_config(root, kind);
  cfg.epochs = 3;
  TrainState st = fresh_state(cfg);
  const ImageSet a = load_image_dir(root / "data" / "trainA");
  const ImageSet b = load_image_dir(root / "data" / "trainB");
  Trainer t(st, a, b);
  for (std::size_t i = 0; i < steps; ++i) t.step();
  return st;
}

void reseal(std::vector<std::uint8_t>& bytes) {
  const std::uint64_t sum = fnv1a64(std::span(bytes).first(bytes.size() - 8));
  for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + i] = static_cast<std::uint8_t>(sum >> (8 * i));
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
  const std::uint8_t a[] = {'a'};
  CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cull);
  const std::uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(fnv1a64(foobar) == 0x85944171f73967e8ull);
}

TEST_CASE("round trip is bit-exact including optimizer state") {
  TempDir dir("devgan_test_ckpt_roundtrip");
  generate_synthetic(testing::tiny_spec(), dir.path / "data");
  for (ModelKind kind : {ModelKind::proposed, ModelKind::baseline}) {
    const TrainState st = trained_state(dir.path, kind, 3);
    const auto bytes = encode_checkpoint(st);
    REQUIRE(bytes.size() > 16);
    CHECK(std::memcmp(bytes.data(), "DEVGAN01", 8) == 0);
    const TrainState back = decode_checkpoint(bytes);
    CHECK(back.cfg == st.cfg);
    CHECK(back.progress == st.progress);
    CHECK(back.model == st.model);
    CHECK(encode_checkpoint(back) == bytes);

    const auto path = dir.path / "ck.bin";
    save_checkpoint(st, path);
    const TrainState loaded = load_checkpoint(path);
    save_checkpoint(loaded, dir.path / "ck2.bin");
    CHECK(testing::read_bytes(path) == testing::read_bytes(dir.path / "ck2.bin"));
    CHECK_FALSE(std::filesystem::exists(dir.path / "ck.bin.tmp"));
  }
}

TEST_CASE("corruption is detected before any state is returned") {
  TempDir dir("devgan_test_ckpt_corrupt");
  generate_synthetic(testing::tiny_spec(), dir.path / "data");
  const auto good = encode_checkpoint(trained_state(dir.path, ModelKind::proposed, 1));

  auto bad = good;
  bad[bad.size() / 2] ^= 0x10;
  CHECK(decode_error(bad) == ErrorCode::checkpoint_checksum);
  bad = good;
  bad[bad.size() - 1] ^= 0x01;
  CHECK(decode_error(bad) == ErrorCode::checkpoint_checksum);
  bad = good;
  bad[3] = 'X';
  CHECK(decode_error(bad) == ErrorCode::checkpoint_magic);
  CHECK(decode_error(std::span(good).first(10)) == ErrorCode::checkpoint_truncated);
  CHECK(decode_error(std::span(good).first(4)) == ErrorCode::checkpoint_magic);
  CHECK(decode_error(std::span(good).first(good.size() - 100)) == ErrorCode::checkpoint_checksum);

  const auto path = dir.path / "bad.bin";
  {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(good.data()), static_cast<std::streamsize>(good.size() - 1));
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);
  try {
    load_checkpoint(dir.path / "absent.bin");
    FAIL("expected io");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("missing network and shape mismatch are distinct errors") {
  TempDir dir("devgan_test_ckpt_missing");
  generate_synthetic(testing::tiny_spec(), dir.path / "data");
  const TrainState st = trained_state(dir.path, ModelKind::proposed, 1);

  TrainState missing = st;
  auto& nets = missing.model.networks();
  nets.erase(std::ranges::find_if(nets, [](const NetworkParams& n) { return n.name() == "translator"; }));
  try {
    decode_checkpoint(encode_checkpoint(missing));
    FAIL("expected missing network");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::checkpoint_missing_network);
    CHECK(std::string(e.what()).find("translator") != std::string::npos);
  }

  // Config claims wider layers than the stored tensors.
  TrainState wide = st;
  wide.cfg.arch.base_channels = 8;
  CHECK(decode_error(encode_checkpoint(wide)) == ErrorCode::checkpoint_shape);

  // A well-sealed file with an extra trailing byte before the checksum.
  auto bytes = encode_checkpoint(st);
  bytes.insert(bytes.end() - 8, 0x00);
  reseal(bytes);
  CHECK(decode_error(bytes) == ErrorCode::checkpoint_shape);
}

TEST_CASE("10 steps + checkpoint + 10 steps equals 20 straight") {
  TempDir dir("devgan_test_ckpt_resume");
  generate_synthetic(testing::tiny_spec(), dir.path / "data");
  const ImageSet a = load_image_dir(dir.path / "data" / "trainA");
  const ImageSet b = load_image_dir(dir.path / "data" / "trainB");
  for (ModelKind kind : {ModelKind::proposed, ModelKind::baseline}) {
    CAPTURE(model_name(kind));
    TrainConfig cfg = testing::tiny_config(dir.path, kind);
    cfg.epochs = 3;
    // Step 10 of 10-step epochs crosses an epoch boundary mid-run when batch 2.
    cfg.batch_size = 2;

    TrainState straight = fresh_state(cfg);
    std::vector<StepReport> ref;
    {
      Trainer t(straight, a, b);
      for (int i = 0; i < 20 && !t.done(); ++i) ref.push_back(t.step());
    }
    REQUIRE(ref.size() == 15);

    TrainState first = fresh_state(cfg);
    std::vector<StepReport> got;
    {
      Trainer t(first, a, b);
      for (int i = 0; i < 7; ++i) got.push_back(t.step());
    }
    save_checkpoint(first, dir.path / "mid.bin");
    TrainState resumed = load_checkpoint(dir.path / "mid.bin");
    {
      Trainer t(resumed, a, b);
      while (!t.done()) got.push_back(t.step());
    }
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(same_losses(got[i], ref[i]));
    CHECK(resumed.model == straight.model);
    CHECK(resumed.progress == straight.progress);
    CHECK(encode_checkpoint(resumed) == encode_checkpoint(straight));
  }
}

TEST_CASE("resume across a 10-step boundary with batch 1") {
  TempDir dir("devgan_test_ckpt_resume1");
  generate_synthetic(testing::tiny_spec(), dir.path / "data");
  const ImageSet a = load_image_dir(dir.path / "data" / "trainA");
  const ImageSet b = load_image_dir(dir.path / "data" / "trainB");
  TrainConfig cfg = testing::tiny_config(dir.path, ModelKind::proposed);
  cfg.epochs = 2;
  TrainState straight = fresh_state(cfg);
  {
    Trainer t(straight, a, b);
    for (int i = 0; i < 20; ++i) t.step();
  }
  TrainState part = fresh_state(cfg);
  {
    Trainer t(part, a, b);
    for (int i = 0; i < 10; ++i) t.step();
  }
  TrainState resumed = decode_checkpoint(encode_checkpoint(part));
  {
    Trainer t(resumed, a, b);
    for (int i = 0; i < 10; ++i) t.step();
  }
  CHECK(resumed.model == straight.model);
}
