#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "devgan/config.hpp"
#include "devgan/data.hpp"

namespace testing {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::size_t count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

/// 16x16 images, small enough for many steps per test.
inline devgan::SynthSpec tiny_spec(std::size_t count = 10) {
  devgan::SynthSpec s;
  s.image_size = 16;
  s.count_a = count;
  s.count_b = count;
  s.test_a = 3;
  s.test_b = 3;
  s.seed = 5;
  return s;
}

inline devgan::TrainConfig tiny_config(const fs::path& root, devgan::ModelKind model) {
  devgan::TrainConfig c;
  c.model = model;
  c.seed = 3;
  c.arch.image_size = 16;
  c.arch.base_channels = 4;
  c.arch.encoder_downsamples = 2;
  c.arch.translator_resblocks = 1;
  c.arch.disc_layers = 1;
  c.data_root = root / "data";
  c.steps_csv = root / "run" / "steps.csv";
  c.epochs_csv = root / "run" / "epochs.csv";
  c.checkpoint_path = root / "run" / "checkpoint.bin";
  c.audit_every = 1;
  return c;
}

}  // namespace testing
