#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "devgan/data.hpp"
#include "devgan/error.hpp"

using namespace devgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f << bytes;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ErrorCode ppm_error(const fs::path& p) {
  try {
    read_ppm(p);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

SynthSpec small_spec() {
  SynthSpec s;
  s.image_size = 24;
  s.count_a = 4;
  s.count_b = 3;
  s.test_a = 2;
  s.test_b = 2;
  s.seed = 77;
  return s;
}

}  // namespace

TEST_CASE("pixel mapping") {
  Rgb8Image img{3, 1, {255, 0, 128, 0, 0, 0, 1, 2, 3}};
  const Tensor t = to_tensor(img);
  CHECK(t.shape() == Shape{3, 1, 3});
  CHECK(t[0] == 1.0);   // r of pixel 0
  CHECK(t[3] == -1.0);  // g of pixel 0
  CHECK(t[6] == 2.0 * 128.0 / 255.0 - 1.0);
  CHECK(std::abs(t[6] - 0.00392) < 1e-5);
}

TEST_CASE("hand-written 2x2 P6 fixture") {
  TempDir dir("devgan_test_ppm_fixture");
  // Comment in the header; pixels (r,g,b): (255,0,0) (0,255,0) / (0,0,255) (128,128,128)
  std::string bytes = "P6\n# fixture\n2 2\n255\n";
  for (int v : {255, 0, 0, 0, 255, 0, 0, 0, 255, 128, 128, 128}) bytes.push_back(static_cast<char>(v));
  write_bytes(dir.path / "f.ppm", bytes);
  const Tensor t = load_image(dir.path / "f.ppm");
  const double g = 2.0 * 128.0 / 255.0 - 1.0;
  const Tensor want(Shape{3, 2, 2}, {1, -1, -1, g,    // red plane
                                     -1, 1, -1, g,    // green plane
                                     -1, -1, 1, g});  // blue plane
  CHECK(t.shape() == want.shape());
  CHECK(std::ranges::equal(t.data(), want.data()));
  save_image(t, dir.path / "g.ppm");
  CHECK(read_bytes(dir.path / "g.ppm") == "P6\n2 2\n255\n" + bytes.substr(bytes.size() - 12));
}

TEST_CASE("PPM errors are distinct") {
  TempDir dir("devgan_test_ppm_errors");
  write_bytes(dir.path / "magic.ppm", "P3\n1 1\n255\n0 0 0\n");
  write_bytes(dir.path / "dims.ppm", "P6\nx 1\n255\n");
  write_bytes(dir.path / "maxval.ppm", "P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06");
  write_bytes(dir.path / "short.ppm", "P6\n2 1\n255\n\x01\x02\x03\x04");
  CHECK(ppm_error(dir.path / "magic.ppm") == ErrorCode::ppm_header);
  CHECK(ppm_error(dir.path / "dims.ppm") == ErrorCode::ppm_header);
  CHECK(ppm_error(dir.path / "maxval.ppm") == ErrorCode::ppm_maxval);
  CHECK(ppm_error(dir.path / "short.ppm") == ErrorCode::ppm_truncated);
  CHECK(ppm_error(dir.path / "missing.ppm") == ErrorCode::io);
}

TEST_CASE("save rounds half up and clamps") {
  // x = 2p/255 - 1 for p = 10.5 sits exactly halfway.
  Tensor t(Shape{3, 1, 2}, {2.0 * 10.5 / 255.0 - 1.0, 1.7, -3.0, 2.0 * 99.49 / 255.0 - 1.0, 0.0, -1.0});
  const Rgb8Image img = to_rgb8(t);
  CHECK(img.pixels == std::vector<std::uint8_t>{11, 0, 128, 255, 99, 0});
}

TEST_CASE("save/load round trip is idempotent after one quantization") {
  TempDir dir("devgan_test_ppm_roundtrip");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  Tensor t(Shape{3, 5, 4});
  for (double& v : t.data()) v = u(rng);
  save_image(t, dir.path / "a.ppm");
  const Tensor once = load_image(dir.path / "a.ppm");
  for (double v : once.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  save_image(once, dir.path / "b.ppm");
  CHECK(std::ranges::equal(load_image(dir.path / "b.ppm").data(), once.data()));
  CHECK(read_bytes(dir.path / "a.ppm") == read_bytes(dir.path / "b.ppm"));
}

TEST_CASE("synthetic generation is deterministic and byte-identical") {
  TempDir d1("devgan_test_synth_1"), d2("devgan_test_synth_2");
  const SynthSpec spec = small_spec();
  const Manifest m1 = generate_synthetic(spec, d1.path);
  const Manifest m2 = generate_synthetic(spec, d2.path);
  CHECK(m1 == m2);
  CHECK(m1.size() == 11);
  for (const ManifestEntry& e : m1) {
    CHECK(read_bytes(d1.path / e.filename) == read_bytes(d2.path / e.filename));
  }
  CHECK(read_bytes(d1.path / "manifest.csv") == read_bytes(d2.path / "manifest.csv"));
  CHECK(read_manifest(d1.path / "manifest.csv") == m1);
  const std::string header = read_bytes(d1.path / "manifest.csv").substr(0, 40);
  CHECK(header == "filename,domain,cx,cy,radius,r,g,b,seed\n");
  for (const char* sub : {"trainA", "trainB", "testA", "testB"}) CHECK(fs::is_directory(d1.path / sub));
  CHECK(load_image_dir(d1.path / "trainA").size() == 4);
  CHECK(load_image_dir(d1.path / "testB").size() == 2);

  SynthSpec other = spec;
  other.seed = 78;
  CHECK_FALSE(plan_synthetic(other) == m1);
}

TEST_CASE("manifest ground truth matches the rendered pixels") {
  SynthSpec spec = small_spec();
  spec.image_size = 48;
  spec.count_a = 10;
  spec.count_b = 10;
  for (const ManifestEntry& e : plan_synthetic(spec)) {
    CAPTURE(e.filename);
    const Rgb centre = e.domain == 'A' ? spec.disk_color_a : spec.disk_color_b;
    for (int c = 0; c < 3; ++c) CHECK(std::abs(e.color[c] - centre[c]) <= spec.jitter);
    CHECK(e.radius >= spec.radius_min * spec.image_size);
    CHECK(e.radius <= spec.radius_max * spec.image_size);
    const Rgb8Image img = render_synthetic(e, spec.image_size);
    std::size_t disk = 0, background = 0, disk_colored = 0;
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) {
        const std::uint8_t* p = &img.pixels[(y * img.width + x) * 3];
        if (e.in_disk(x, y)) {
          ++disk;
          bool near = true;
          for (int c = 0; c < 3; ++c) near = near && std::abs(p[c] - centre[c]) <= spec.jitter;
          disk_colored += near;
          CHECK(p[0] == e.color[0]);
          CHECK(p[1] == e.color[1]);
          CHECK(p[2] == e.color[2]);
        } else {
          ++background;
        }
      }
    CHECK(disk + background == img.width * img.height);
    CHECK(disk > 0);
    CHECK(background > 0);
    CHECK(disk_colored >= 1);
  }
}

TEST_CASE("domains share the background distribution") {
  // Background pixels of an A image and a B image with the same background
  // draw are identical; only the disk differs.
  SynthSpec spec = small_spec();
  spec.count_a = 200;
  spec.count_b = 200;
  spec.image_size = 16;
  double mean_a = 0.0, mean_b = 0.0;
  std::size_t na = 0, nb = 0;
  for (const ManifestEntry& e : plan_synthetic(spec)) {
    if (e.filename.rfind("train", 0) != 0) continue;
    const Rgb8Image img = render_synthetic(e, spec.image_size);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        if (e.in_disk(x, y)) continue;
        const double v = img.pixels[(y * 16 + x) * 3] + img.pixels[(y * 16 + x) * 3 + 1] + img.pixels[(y * 16 + x) * 3 + 2];
        (e.domain == 'A' ? mean_a : mean_b) += v;
        ++(e.domain == 'A' ? na : nb);
      }
  }
  mean_a /= static_cast<double>(na);
  mean_b /= static_cast<double>(nb);
  // Per-pixel channel sum has sd ~ 220 over 200 images of ~180 background
  // pixels each; the means agree far inside that.
  CHECK(std::abs(mean_a - mean_b) < 30.0);
}

TEST_CASE("image directory loading") {
  TempDir dir("devgan_test_dir");
  CHECK_THROWS_AS(load_image_dir(dir.path / "nope"), Error);
  try {
    load_image_dir(dir.path);
    FAIL("expected empty_dataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_dataset);
  }
  const Rgb8Image img{1, 1, {1, 2, 3}};
  write_ppm(img, dir.path / "b.ppm");
  write_ppm(img, dir.path / "a.ppm");
  write_bytes(dir.path / "notes.txt", "x");
  const ImageSet s = load_image_dir(dir.path);
  CHECK(s.names == std::vector<std::string>{"a.ppm", "b.ppm"});
  const std::size_t idx[] = {1, 0, 1};
  CHECK(stack_images(s, idx).shape() == Shape{3, 3, 1, 1});
}

TEST_CASE("epoch batching follows the min rule") {
  CHECK(epoch_batches(3, 5, 1, 9).size() == 3);
  CHECK(epoch_batches(1177, 996, 1, 9).size() == 996);
  CHECK(epoch_batches(10, 10, 4, 9).size() == 3);
  for (const BatchIndices& b : epoch_batches(10, 7, 3, 9)) CHECK(b.a.size() == b.b.size());
  std::size_t total = 0;
  for (const BatchIndices& b : epoch_batches(10, 7, 3, 9)) total += b.a.size();
  CHECK(total == 7);
}

TEST_CASE("batch order is a function of the epoch seed") {
  const auto x = epoch_batches(20, 30, 2, epoch_seed(5, 0));
  const auto y = epoch_batches(20, 30, 2, epoch_seed(5, 0));
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].a == y[i].a);
    CHECK(x[i].b == y[i].b);
  }
  // Every A index appears once, B indices are distinct and in range.
  std::set<std::size_t> as, bs;
  for (const auto& b : x) {
    as.insert(b.a.begin(), b.a.end());
    bs.insert(b.b.begin(), b.b.end());
  }
  CHECK(as.size() == 20);
  CHECK(bs.size() == 20);
  CHECK(*bs.rbegin() < 30);
}

TEST_CASE("pairings differ across epochs") {
  for (std::size_t n : {3, 4, 10}) {
    for (std::uint64_t seed : {1, 2, 3, 1000}) {
      auto pairs = [&](std::size_t e) {
        std::set<std::pair<std::size_t, std::size_t>> out;
        for (const auto& b : epoch_batches(n, n, 1, epoch_seed(seed, e))) out.emplace(b.a[0], b.b[0]);
        return out;
      };
      bool differs = false;
      for (std::size_t e = 1; e < 6 && !differs; ++e) differs = pairs(0) != pairs(e);
      CHECK(differs);
    }
  }
  CHECK(epoch_seed(1, 0) != epoch_seed(1, 1));
  CHECK(epoch_seed(1, 0) != epoch_seed(2, 0));
}
