#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "devgan/config.hpp"
#include "devgan/error.hpp"

using namespace devgan;

namespace {

ErrorCode code_of(std::string_view text) {
  try {
    parse_config(text, "test.cfg");
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

std::string message_of(std::string_view text) {
  try {
    parse_config(text, "test.cfg");
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config gives defaults") {
  const TrainConfig c = parse_config("");
  CHECK(c == TrainConfig{});
  CHECK(c.arch.image_size == 64);
  CHECK(c.weights.lambda_cyc == 10.0);
  CHECK(c.optimizer.lr == 2e-4);
}

TEST_CASE("dotted keys, comments and whitespace") {
  const TrainConfig c = parse_config(
      "# run\n"
      "model = baseline\n"
      "\n"
      "  arch.base_channels=16   \n"
      "arch.translator_resblocks = 0\n"
      "weights.use_dev_term_b = false\n"
      "weights.adv_mode = cross_entropy\n"
      "weights.distance = l2\n"
      "optimizer.lr = 1e-3\n"
      "seed = 18446744073709551615\n"
      "data.root = /tmp/some dir\n");
  CHECK(c.model == ModelKind::baseline);
  CHECK(c.arch.base_channels == 16);
  CHECK(c.arch.translator_resblocks == 0);
  CHECK_FALSE(c.weights.use_dev_term_b);
  CHECK(c.weights.adv_mode == AdvMode::cross_entropy);
  CHECK(c.weights.distance == Distance::l2);
  CHECK(c.optimizer.lr == 1e-3);
  CHECK(c.seed == 18446744073709551615ull);
  CHECK(c.data_root == "/tmp/some dir");
}

TEST_CASE("serialize round trip is exact") {
  TrainConfig c;
  c.model = ModelKind::baseline;
  c.seed = 987654321;
  c.epochs = 7;
  c.batch_size = 3;
  c.arch.base_channels = 8;
  c.arch.disc_layers = 2;
  c.weights.lambda_dev_a = 0.1;
  c.weights.lambda_adv = 1.0 / 3.0;
  c.weights.use_dev_term_b = false;
  c.optimizer.beta2 = 0.99;
  c.optimizer.eps = 1.2345678901234567e-9;
  c.data_root = "d";
  c.checkpoint_every = 2;
  c.audit_every = 0;
  c.recon_threshold = 0.0625;
  const std::string text = serialize_config(c);
  CHECK(parse_config(text) == c);
  CHECK(serialize_config(parse_config(text)) == text);
  CHECK(text.find("arch.base_channels=8\n") != std::string::npos);
}

TEST_CASE("syntax errors name the line") {
  CHECK(code_of("model=proposed\nnot a pair\n") == ErrorCode::config_parse);
  CHECK(message_of("model=proposed\nnot a pair\n").find("test.cfg:2") != std::string::npos);
  CHECK(code_of("=3\n") == ErrorCode::config_parse);
}

TEST_CASE("unknown and duplicate keys are rejected") {
  CHECK(code_of("arch.widht=3\n") == ErrorCode::config_parse);
  CHECK(message_of("seed=1\n\narch.widht=3\n").find("test.cfg:3") != std::string::npos);
  CHECK(message_of("seed=1\n\narch.widht=3\n").find("arch.widht") != std::string::npos);
  CHECK(code_of("seed=1\nseed=2\n") == ErrorCode::config_parse);
}

TEST_CASE("bad values are config_value errors with the line") {
  CHECK(code_of("epochs=0\n") == ErrorCode::config_value);
  CHECK(code_of("batch_size=-1\n") == ErrorCode::config_value);
  CHECK(code_of("seed=abc\n") == ErrorCode::config_value);
  CHECK(code_of("model=cyclegan\n") == ErrorCode::config_value);
  CHECK(code_of("weights.lambda_cyc=-2\n") == ErrorCode::config_value);
  CHECK(code_of("weights.use_dev_term_b=maybe\n") == ErrorCode::config_value);
  CHECK(code_of("optimizer.lr=1e-3x\n") == ErrorCode::config_value);
  CHECK(code_of("arch.image_size=66\n") == ErrorCode::config_value);
  CHECK(message_of("\nepochs=zero\n").find("test.cfg:2") != std::string::npos);
}

TEST_CASE("load_config names a missing path") {
  try {
    load_config("/nonexistent/dir/run.cfg");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("/nonexistent/dir/run.cfg") != std::string::npos);
  }
  const auto path = std::filesystem::temp_directory_path() / "devgan_test_config.cfg";
  std::ofstream(path) << "epochs=4\n";
  CHECK(load_config(path).epochs == 4);
  std::filesystem::remove(path);
}
