#include <algorithm>
#include <vector>

#include "devgan/error.hpp"
#include "devgan/kernels/gemm.hpp"
#include "gemm_variants.hpp"

namespace devgan::kernels {

ConvGeometry make_geometry(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
                           std::size_t pad) {
  if (kernel_h == 0 || kernel_w == 0 || stride == 0) {
    throw Error(ErrorCode::invalid_argument, "convolution needs kernel >= 1 and stride >= 1");
  }
  if (height + 2 * pad < kernel_h || width + 2 * pad < kernel_w) {
    throw Error(ErrorCode::invalid_argument, "convolution kernel larger than padded input");
  }
  ConvGeometry g;
  g.channels = channels;
  g.height = height;
  g.width = width;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride = stride;
  g.pad = pad;
  g.out_h = (height + 2 * pad - kernel_h) / stride + 1;
  g.out_w = (width + 2 * pad - kernel_w) / stride + 1;
  return g;
}

namespace {

// Image coordinate for output index `o` and kernel tap `t`; negative or
// past-the-end values mean the tap lands in the zero padding.
inline std::ptrdiff_t source_coord(std::size_t o, std::size_t t, const ConvGeometry& g) {
  return static_cast<std::ptrdiff_t>(o * g.stride + t) - static_cast<std::ptrdiff_t>(g.pad);
}

inline double im2col_at(const Im2colOperand& op, std::size_t patch, std::size_t pos) {
  const ConvGeometry& g = op.geometry;
  const std::size_t kk = g.kernel_h * g.kernel_w;
  const std::size_t ch = patch / kk;
  const std::size_t ky = (patch % kk) / g.kernel_w;
  const std::size_t kx = patch % g.kernel_w;
  const std::ptrdiff_t y = source_coord(pos / g.out_w, ky, g);
  const std::ptrdiff_t x = source_coord(pos % g.out_w, kx, g);
  if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(g.height) ||
      x >= static_cast<std::ptrdiff_t>(g.width)) {
    return 0.0;
  }
  return op.image[(ch * g.height + static_cast<std::size_t>(y)) * g.width +
                  static_cast<std::size_t>(x)];
}

void pack_dense(const DenseOperand& op, bool transposed, std::size_t r0, std::size_t rows,
                std::size_t c0, std::size_t cols, std::size_t width, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* out = dst + r * width;
    if (!transposed) {
      const double* src = op.data + (r0 + r) * op.ld + c0;
      std::copy(src, src + cols, out);
    } else {
      const double* src = op.data + c0 * op.ld + (r0 + r);
      for (std::size_t c = 0; c < cols; ++c) out[c] = src[c * op.ld];
    }
    std::fill(out + cols, out + width, 0.0);
  }
}

// Writes im2col row `patch` for positions [pos0, pos0 + count) to
// out[i * out_stride]. Runs inside one output row are copied with the input
// stride; taps that land in the padding become zeros.
void copy_patch_row(const Im2colOperand& op, std::size_t patch, std::size_t pos0,
                    std::size_t count, double* out, std::size_t out_stride) {
  const ConvGeometry& g = op.geometry;
  const std::size_t kk = g.kernel_h * g.kernel_w;
  const std::size_t ch = patch / kk;
  const std::size_t ky = (patch % kk) / g.kernel_w;
  const std::size_t kx = patch % g.kernel_w;
  const double* plane = op.image + ch * g.height * g.width;
  // Valid output columns satisfy 0 <= ox*stride + kx - pad < width.
  const std::size_t ox_lo = kx >= g.pad ? 0 : (g.pad - kx + g.stride - 1) / g.stride;
  const std::size_t ox_hi =
      g.width + g.pad > kx ? std::min(g.out_w, (g.width + g.pad - kx - 1) / g.stride + 1) : 0;

  std::size_t pos = pos0;
  const std::size_t end = pos0 + count;
  while (pos < end) {
    const std::size_t oy = pos / g.out_w;
    const std::size_t ox_begin = pos % g.out_w;
    const std::size_t ox_end = std::min(g.out_w, ox_begin + (end - pos));
    const std::ptrdiff_t y = source_coord(oy, ky, g);
    double* row_out = out + (pos - pos0) * out_stride;
    if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height) || ox_lo >= ox_hi) {
      for (std::size_t ox = ox_begin; ox < ox_end; ++ox) row_out[(ox - ox_begin) * out_stride] = 0.0;
    } else {
      const double* src = plane + static_cast<std::size_t>(y) * g.width;
      const std::size_t lo = std::clamp(ox_lo, ox_begin, ox_end);
      const std::size_t hi = std::clamp(ox_hi, lo, ox_end);
      for (std::size_t ox = ox_begin; ox < lo; ++ox) row_out[(ox - ox_begin) * out_stride] = 0.0;
      const double* s = src + (lo * g.stride + kx - g.pad);
      double* o = row_out + (lo - ox_begin) * out_stride;
      const std::size_t n = hi - lo;
      if (g.stride == 1 && out_stride == 1) {
        std::copy(s, s + n, o);
      } else {
        for (std::size_t i = 0; i < n; ++i) o[i * out_stride] = s[i * g.stride];
      }
      for (std::size_t ox = hi; ox < ox_end; ++ox) row_out[(ox - ox_begin) * out_stride] = 0.0;
    }
    pos += ox_end - ox_begin;
  }
}

// Rows are patch entries, columns are output positions.
void pack_im2col_rows_patch(const Im2colOperand& op, std::size_t r0, std::size_t rows,
                            std::size_t c0, std::size_t cols, std::size_t width, double* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* out = dst + r * width;
    copy_patch_row(op, r0 + r, c0, cols, out, 1);
    std::fill(out + cols, out + width, 0.0);
  }
}

// Rows are output positions, columns are patch entries.
void pack_im2col_rows_position(const Im2colOperand& op, std::size_t r0, std::size_t rows,
                               std::size_t c0, std::size_t cols, std::size_t width,
                               double* dst) {
  for (std::size_t c = 0; c < cols; ++c) copy_patch_row(op, c0 + c, r0, rows, dst + c, width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill(dst + r * width + cols, dst + (r + 1) * width, 0.0);
  }
}

}  // namespace

double operand_at(const Operand& op, std::size_t row, std::size_t col) {
  if (const auto* d = std::get_if<DenseOperand>(&op)) {
    return d->transposed ? d->data[col * d->ld + row] : d->data[row * d->ld + col];
  }
  const auto& im = std::get<Im2colOperand>(op);
  return im.transposed ? im2col_at(im, col, row) : im2col_at(im, row, col);
}

namespace detail {

void pack_panel(const Operand& op, bool swap, std::size_t r0, std::size_t rows, std::size_t c0,
                std::size_t cols, std::size_t width, double* dst) {
  if (const auto* d = std::get_if<DenseOperand>(&op)) {
    pack_dense(*d, d->transposed != swap, r0, rows, c0, cols, width, dst);
    return;
  }
  const auto& im = std::get<Im2colOperand>(op);
  if (im.transposed != swap) {
    pack_im2col_rows_position(im, r0, rows, c0, cols, width, dst);
  } else {
    pack_im2col_rows_patch(im, r0, rows, c0, cols, width, dst);
  }
}

void pack_b_block(const Operand& op, std::size_t k0, std::size_t kc, std::size_t j0,
                  std::size_t cols, std::size_t nr, double* dst) {
  const std::size_t panels = (cols + nr - 1) / nr;
  const auto* im = std::get_if<Im2colOperand>(&op);
  if (im == nullptr || im->transposed) {
    // Per-column or per-panel access is already contiguous enough here.
    if (im != nullptr) {
      for (std::size_t c = 0; c < cols; ++c) {
        copy_patch_row(*im, j0 + c, k0, kc, dst + (c / nr) * kc * nr + c % nr, nr);
      }
      for (std::size_t c = cols; c < panels * nr; ++c) {
        double* out = dst + (c / nr) * kc * nr + c % nr;
        for (std::size_t r = 0; r < kc; ++r) out[r * nr] = 0.0;
      }
      return;
    }
    for (std::size_t p = 0; p < panels; ++p) {
      const std::size_t c0 = p * nr;
      pack_panel(op, false, k0, kc, j0 + c0, std::min(nr, cols - c0), nr, dst + p * kc * nr);
    }
    return;
  }
  thread_local std::vector<double> row;
  row.assign(panels * nr, 0.0);
  for (std::size_t r = 0; r < kc; ++r) {
    copy_patch_row(*im, k0 + r, j0, cols, row.data(), 1);
    for (std::size_t p = 0; p < panels; ++p) {
      std::copy(row.begin() + static_cast<std::ptrdiff_t>(p * nr),
                row.begin() + static_cast<std::ptrdiff_t>((p + 1) * nr),
                dst + (p * kc + r) * nr);
    }
  }
}

}  // namespace detail

void col2im_add(const double* col, const ConvGeometry& g, double* image) {
  const std::size_t kk = g.kernel_h * g.kernel_w;
  const std::size_t positions = g.positions();
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t patch = 0; patch < g.patch_size(); ++patch) {
    const std::size_t ch = patch / kk;
    const std::size_t ky = (patch % kk) / g.kernel_w;
    const std::size_t kx = patch % g.kernel_w;
    double* plane = image + ch * g.height * g.width;
    const double* row = col + patch * positions;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      const std::ptrdiff_t y = source_coord(oy, ky, g);
      if (y < 0 || y >= h) continue;
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        const std::ptrdiff_t x = source_coord(ox, kx, g);
        if (x < 0 || x >= w) continue;
        plane[y * w + x] += row[oy * g.out_w + ox];
      }
    }
  }
}

}  // namespace devgan::kernels
