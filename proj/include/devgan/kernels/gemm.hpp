#pragma once

// Dense matrix product used by every convolution in the engine.
//
// Three implementations share one contract: a naive scalar reference and two
// packed, register-blocked variants (AVX2+FMA, AVX-512F). The variant is picked
// once at startup from CPU features; DEVGAN_KERNEL=scalar|avx2|avx512 overrides
// it. Within one variant results are bit-reproducible for any thread count:
// every output element is reduced by exactly one thread in a fixed k order.

#include <cstddef>
#include <optional>
#include <string_view>
#include <variant>

namespace devgan::kernels {

enum class Isa { scalar, avx2, avx512 };

std::string_view isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);
bool isa_supported(Isa isa);

/// Widest variant the running CPU supports.
Isa best_isa();
/// Variant used by gemm(); honours DEVGAN_KERNEL on first call.
Isa active_isa();
/// Throws devgan::Error when the CPU lacks the requested instructions.
void set_active_isa(Isa isa);

/// Worker threads per gemm call. Defaults to DEVGAN_THREADS, else 1.
unsigned thread_count();
void set_thread_count(unsigned threads);

/// Geometry of a 2-D convolution over one sample's [C,H,W] planes.
struct ConvGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  std::size_t patch_size() const { return channels * kernel_h * kernel_w; }
  std::size_t positions() const { return out_h * out_w; }
};

/// Builds the geometry and fills out_h/out_w. Throws on an empty output.
ConvGeometry make_geometry(std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t kernel_h, std::size_t kernel_w, std::size_t stride,
                           std::size_t pad);

/// Row-major matrix; `transposed` reads element (r, c) from data[c * ld + r].
struct DenseOperand {
  const double* data = nullptr;
  std::size_t ld = 0;
  bool transposed = false;
};

/// The im2col matrix of an image without materializing it. Rows are patch
/// entries (channel, ky, kx) and columns are output positions; `transposed`
/// swaps the two.
struct Im2colOperand {
  const double* image = nullptr;
  ConvGeometry geometry;
  bool transposed = false;
};

using Operand = std::variant<DenseOperand, Im2colOperand>;

double operand_at(const Operand& op, std::size_t row, std::size_t col);

/// C[m x n] = A[m x k] * B[k x n], or C += A*B when `accumulate`.
void gemm(std::size_t m, std::size_t n, std::size_t k, const Operand& a, const Operand& b,
          double* c, std::size_t ldc, bool accumulate);

/// Same contract, forcing one variant. Used by the equivalence tests.
void gemm(Isa isa, std::size_t m, std::size_t n, std::size_t k, const Operand& a,
          const Operand& b, double* c, std::size_t ldc, bool accumulate);

/// Scatter-adds a [patch_size x positions] column matrix back onto the image.
void col2im_add(const double* col, const ConvGeometry& g, double* image);

}  // namespace devgan::kernels
