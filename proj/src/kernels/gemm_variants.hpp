#pragma once

// Internal: per-ISA entry points. Each blocked variant supplies a micro-kernel
// that computes one mr x nr tile from packed panels; the packing and blocking
// driver in gemm.cpp is shared and compiled for the baseline target.

#include <cstddef>

#include "devgan/kernels/gemm.hpp"

namespace devgan::kernels::detail {

/// c[mr x nr] (+)= sum_k a[k*mr + i] * b[k*nr + j]
using MicroKernelFn = void (*)(std::size_t kc, const double* a, const double* b, double* c,
                               std::size_t ldc, bool accumulate);

struct MicroKernel {
  std::size_t mr;
  std::size_t nr;
  MicroKernelFn fn;
};

MicroKernel avx2_micro_kernel();
MicroKernel avx512_micro_kernel();

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const Operand& a, const Operand& b,
                 double* c, std::size_t ldc, bool accumulate);

void gemm_blocked(const MicroKernel& kernel, std::size_t m, std::size_t n, std::size_t k,
                  const Operand& a, const Operand& b, double* c, std::size_t ldc,
                  bool accumulate);

/// dst[r * width + col] = element(r0 + r, c0 + col) for the logical matrix
/// (swap ? op^T : op); columns past `cols` are zero-filled up to `width`.
void pack_panel(const Operand& op, bool swap, std::size_t r0, std::size_t rows, std::size_t c0,
                std::size_t cols, std::size_t width, double* dst);

/// Packs columns [j0, j0 + cols) of B's depth block [k0, k0 + kc) as
/// consecutive nr-wide panels: dst[(panel * kc + r) * nr + j].
void pack_b_block(const Operand& op, std::size_t k0, std::size_t kc, std::size_t j0,
                  std::size_t cols, std::size_t nr, double* dst);

}  // namespace devgan::kernels::detail
