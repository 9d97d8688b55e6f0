#pragma once

// Synthetic two-domain disk images, binary PPM I/O and unpaired batching.
//
// Layout under a dataset root: trainA/ trainB/ testA/ testB/ holding *.ppm,
// plus manifest.csv for generated sets.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "devgan/tensor.hpp"

namespace devgan {

using Rgb = std::array<int, 3>;

struct SynthSpec {
  std::size_t image_size = 64;
  std::size_t count_a = 200;
  std::size_t count_b = 200;
  std::size_t test_a = 30;
  std::size_t test_b = 30;
  Rgb disk_color_a{200, 30, 30};
  Rgb disk_color_b{240, 140, 20};
  int jitter = 20;
  double radius_min = 0.15;
  double radius_max = 0.35;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One manifest row. `filename` is relative to the dataset root, e.g.
/// "testA/0007.ppm". cx, cy, radius are in pixels; pixel (x, y) lies in the
/// disk iff (x + 0.5 - cx)^2 + (y + 0.5 - cy)^2 <= radius^2.
struct ManifestEntry {
  std::string filename;
  char domain = 'A';
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  Rgb color{};
  std::uint64_t seed = 0;

  bool in_disk(std::size_t x, std::size_t y) const;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using Manifest = std::vector<ManifestEntry>;

/// Pixel values 0..255, interleaved RGB, row-major.
struct Rgb8Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Pure function of (spec, domain, index-derived seed).
Rgb8Image render_synthetic(const ManifestEntry& entry, std::size_t image_size);

/// Draws the per-image ground truth for every image of the spec.
Manifest plan_synthetic(const SynthSpec& spec);

/// Writes all images and manifest.csv. Throws ErrorCode::io.
Manifest generate_synthetic(const SynthSpec& spec, const std::filesystem::path& out_dir);

Manifest read_manifest(const std::filesystem::path& csv);
void write_manifest(const Manifest& m, const std::filesystem::path& csv);

/// Throws ppm_header, ppm_truncated, ppm_maxval or io.
Rgb8Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Rgb8Image& img, const std::filesystem::path& path);

/// p -> 2p/255 - 1, giving [3,H,W].
Tensor to_tensor(const Rgb8Image& img);
/// Inverse with round-half-up and clamping to [0,255]. Accepts [3,H,W] or
/// [1,3,H,W].
Rgb8Image to_rgb8(const Tensor& t);

Tensor load_image(const std::filesystem::path& path);
void save_image(const Tensor& t, const std::filesystem::path& path);

/// All *.ppm files of one directory, sorted by filename.
struct ImageSet {
  std::vector<std::string> names;
  std::vector<Tensor> images;

  std::size_t size() const { return images.size(); }
};

/// Throws ErrorCode::empty_dataset if the directory is missing or has no
/// .ppm files.
ImageSet load_image_dir(const std::filesystem::path& dir);

/// Stacks [3,S,S] images into [N,3,S,S].
Tensor stack_images(const ImageSet& set, std::span<const std::size_t> indices);

struct BatchIndices {
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
};

/// One epoch of unpaired batches: each domain shuffled independently from
/// `epoch_seed`, truncated to min(size_a, size_b) and cut into
/// ceil(min / batch_size) batches of equal size within each pair.
std::vector<BatchIndices> epoch_batches(std::size_t size_a, std::size_t size_b, std::size_t batch_size,
                                        std::uint64_t epoch_seed);

/// Seed for epoch `epoch` (0-based) of a run seeded with `seed`.
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch);

/// Mixes a 64-bit value; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace devgan
