#include "devgan/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "devgan/error.hpp"

namespace devgan {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string index_name(std::size_t i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s + ".ppm";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  return out;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, "synthetic spec: " + m); };
  if (image_size < 4) fail("image_size must be >= 4");
  if (count_a < 1 || count_b < 1) fail("train counts must be >= 1");
  if (jitter < 0 || jitter > 255) fail("jitter must lie in [0, 255]");
  if (!(radius_min > 0.0 && radius_min <= radius_max && radius_max < 0.5)) {
    fail("radius fractions must satisfy 0 < min <= max < 0.5");
  }
  for (const Rgb* c : {&disk_color_a, &disk_color_b}) {
    for (int v : *c) {
      if (v < 0 || v > 255) fail("disk colors must lie in [0, 255]");
    }
  }
}

bool ManifestEntry::in_disk(std::size_t x, std::size_t y) const {
  const double dx = static_cast<double>(x) + 0.5 - cx;
  const double dy = static_cast<double>(y) + 0.5 - cy;
  return dx * dx + dy * dy <= radius * radius;
}

Manifest plan_synthetic(const SynthSpec& spec) {
  spec.validate();
  Manifest m;
  const double s = static_cast<double>(spec.image_size);
  struct Split {
    const char* dir;
    char domain;
    std::size_t count;
  };
  const Split splits[] = {{"trainA", 'A', spec.count_a},
                          {"trainB", 'B', spec.count_b},
                          {"testA", 'A', spec.test_a},
                          {"testB", 'B', spec.test_b}};
  for (std::size_t si = 0; si < 4; ++si) {
    const Split& sp = splits[si];
    const Rgb& base = sp.domain == 'A' ? spec.disk_color_a : spec.disk_color_b;
    for (std::size_t i = 0; i < sp.count; ++i) {
      ManifestEntry e;
      e.filename = std::string(sp.dir) + "/" + index_name(i);
      e.domain = sp.domain;
      e.seed = mix_seed(mix_seed(spec.seed) ^ (si << 32 | i));
      std::mt19937_64 rng(e.seed);
      e.radius = std::uniform_real_distribution<double>(spec.radius_min, spec.radius_max)(rng) * s;
      std::uniform_real_distribution<double> centre(e.radius, s - e.radius);
      e.cx = centre(rng);
      e.cy = centre(rng);
      std::uniform_int_distribution<int> jit(-spec.jitter, spec.jitter);
      for (int c = 0; c < 3; ++c) e.color[c] = std::clamp(base[c] + jit(rng), 0, 255);
      m.push_back(std::move(e));
    }
  }
  return m;
}

Rgb8Image render_synthetic(const ManifestEntry& e, std::size_t size) {
  std::mt19937_64 rng(mix_seed(e.seed ^ 0x6267726f756e64ull));
  std::uniform_int_distribution<int> channel(0, 255);
  Rgb c0, c1;
  for (int& v : c0) v = channel(rng);
  for (int& v : c1) v = channel(rng);
  const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const double ux = std::cos(angle), uy = std::sin(angle);

  Rgb8Image img{size, size, std::vector<std::uint8_t>(size * size * 3)};
  const double s = static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      std::uint8_t* px = img.pixels.data() + (y * size + x) * 3;
      if (e.in_disk(x, y)) {
        for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(e.color[c]);
        continue;
      }
      const double proj = ((x + 0.5) / s - 0.5) * ux + ((y + 0.5) / s - 0.5) * uy;
      const double t = std::clamp(proj / std::numbers::sqrt2 + 0.5, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        px[c] = static_cast<std::uint8_t>(std::lround(c0[c] + t * (c1[c] - c0[c])));
      }
    }
  }
  return img;
}

Manifest generate_synthetic(const SynthSpec& spec, const fs::path& out_dir) {
  const Manifest m = plan_synthetic(spec);
  for (const ManifestEntry& e : m) write_ppm(render_synthetic(e, spec.image_size), out_dir / e.filename);
  write_manifest(m, out_dir / "manifest.csv");
  return m;
}

void write_manifest(const Manifest& m, const fs::path& csv) {
  std::ofstream out = open_out(csv);
  out << "filename,domain,cx,cy,radius,r,g,b,seed\n";
  for (const ManifestEntry& e : m) {
    out << e.filename << ',' << e.domain << ',' << fmt(e.cx) << ',' << fmt(e.cy) << ',' << fmt(e.radius) << ','
        << e.color[0] << ',' << e.color[1] << ',' << e.color[2] << ',' << e.seed << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + csv.string());
}

Manifest read_manifest(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::io, "cannot read manifest " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != "filename,domain,cx,cy,radius,r,g,b,seed") {
    throw Error(ErrorCode::io, csv.string() + ": unexpected manifest header");
  }
  Manifest m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      cols.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    auto bad = [&] { throw Error(ErrorCode::io, csv.string() + ":" + std::to_string(line_no) + ": malformed row"); };
    if (cols.size() != 9 || cols[1].size() != 1) bad();
    auto num = [&](std::string_view s, auto& out) {
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc{} || p != s.data() + s.size()) bad();
    };
    ManifestEntry e;
    e.filename = std::string(cols[0]);
    e.domain = cols[1][0];
    num(cols[2], e.cx);
    num(cols[3], e.cy);
    num(cols[4], e.radius);
    for (int c = 0; c < 3; ++c) num(cols[5 + c], e.color[c]);
    num(cols[8], e.seed);
    m.push_back(std::move(e));
  }
  return m;
}

Rgb8Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  const std::string where = path.string() + ": ";

  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&](const char* what) {
    skip_space();
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
    if (ec != std::errc{} || p == bytes.data() + pos) {
      throw Error(ErrorCode::ppm_header, where + "malformed header (" + what + ")");
    }
    pos = static_cast<std::size_t>(p - bytes.data());
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw Error(ErrorCode::ppm_header, where + "not a binary PPM (missing P6 magic)");
  }
  pos = 2;
  const std::size_t width = read_uint("width");
  const std::size_t height = read_uint("height");
  const std::size_t maxval = read_uint("maxval");
  if (width == 0 || height == 0) throw Error(ErrorCode::ppm_header, where + "zero image dimension");
  if (maxval != 255) {
    throw Error(ErrorCode::ppm_maxval, where + "maxval " + std::to_string(maxval) + " unsupported (need 255)");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::ppm_header, where + "missing separator after maxval");
  }
  ++pos;
  const std::size_t need = width * height * 3;
  if (bytes.size() - pos < need) {
    throw Error(ErrorCode::ppm_truncated, where + "payload has " + std::to_string(bytes.size() - pos) +
                                              " bytes, expected " + std::to_string(need));
  }
  Rgb8Image img{width, height, {}};
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

void write_ppm(const Rgb8Image& img, const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

Tensor to_tensor(const Rgb8Image& img) {
  const std::size_t h = img.height, w = img.width;
  Tensor t(Shape{3, h, w});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) t[c * h * w + i] = 2.0 * (img.pixels[i * 3 + c] / 255.0) - 1.0;
  }
  return t;
}

Rgb8Image to_rgb8(const Tensor& t) {
  const Shape& s = t.shape();
  const bool batched = s.size() == 4 && s[0] == 1;
  if (!((s.size() == 3 && s[0] == 3) || (batched && s[1] == 3))) {
    throw Error(ErrorCode::shape_mismatch, "image tensor must be [3,H,W] or [1,3,H,W], got " + shape_str(s));
  }
  const std::size_t h = s[s.size() - 2], w = s[s.size() - 1];
  Rgb8Image img{w, h, std::vector<std::uint8_t>(h * w * 3)};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) {
      const double p = std::floor((t[c * h * w + i] + 1.0) * 0.5 * 255.0 + 0.5);
      img.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(p, 0.0, 255.0));
    }
  }
  return img;
}

Tensor load_image(const fs::path& path) { return to_tensor(read_ppm(path)); }

void save_image(const Tensor& t, const fs::path& path) { write_ppm(to_rgb8(t), path); }

ImageSet load_image_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::empty_dataset, "image directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
  }
  if (files.empty()) throw Error(ErrorCode::empty_dataset, "no .ppm images in " + dir.string());
  std::sort(files.begin(), files.end());
  ImageSet set;
  for (const fs::path& f : files) {
    Tensor img = load_image(f);
    if (!set.images.empty() && img.shape() != set.images.front().shape()) {
      throw Error(ErrorCode::shape_mismatch, f.string() + ": size " + shape_str(img.shape()) +
                                                 " differs from " + shape_str(set.images.front().shape()));
    }
    set.names.push_back(f.filename().string());
    set.images.push_back(std::move(img));
  }
  return set;
}

Tensor stack_images(const ImageSet& set, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::invalid_argument, "empty batch");
  const Shape& s = set.images.at(indices[0]).shape();
  const std::size_t per = numel(s);
  Tensor out(Shape{indices.size(), s[0], s[1], s[2]});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Tensor& img = set.images.at(indices[k]);
    std::copy(img.ptr(), img.ptr() + per, out.ptr() + k * per);
  }
  return out;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return mix_seed(mix_seed(seed) + epoch + 1);
}

std::vector<BatchIndices> epoch_batches(std::size_t size_a, std::size_t size_b, std::size_t batch_size,
                                        std::uint64_t seed) {
  if (size_a == 0 || size_b == 0) throw Error(ErrorCode::empty_dataset, "both domains need at least one image");
  if (batch_size == 0) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  auto order = [](std::size_t n, std::uint64_t s) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(s);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  };
  const std::vector<std::size_t> pa = order(size_a, mix_seed(seed ^ 0xa));
  const std::vector<std::size_t> pb = order(size_b, mix_seed(seed ^ 0xb));
  const std::size_t n = std::min(size_a, size_b);
  std::vector<BatchIndices> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.push_back({{pa.begin() + static_cast<std::ptrdiff_t>(start), pa.begin() + static_cast<std::ptrdiff_t>(end)},
                   {pb.begin() + static_cast<std::ptrdiff_t>(start), pb.begin() + static_cast<std::ptrdiff_t>(end)}});
  }
  return out;
}

}  // namespace devgan
