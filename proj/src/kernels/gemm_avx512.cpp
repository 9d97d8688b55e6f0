#include "gemm_variants.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define DEVGAN_HAVE_X86 1
#endif

namespace devgan::kernels::detail {

#if DEVGAN_HAVE_X86

namespace {

constexpr std::size_t kRows = 8;
constexpr std::size_t kCols = 16;

__attribute__((target("avx512f"))) void micro_8x16(std::size_t kc, const double* a,
                                                   const double* b, double* c, std::size_t ldc,
                                                   bool accumulate) {
  __m512d acc[kRows][2];
  for (auto& row : acc) {
    row[0] = _mm512_setzero_pd();
    row[1] = _mm512_setzero_pd();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const __m512d b0 = _mm512_loadu_pd(b);
    const __m512d b1 = _mm512_loadu_pd(b + 8);
#pragma GCC unroll 8
    for (std::size_t i = 0; i < kRows; ++i) {
      const __m512d ai = _mm512_set1_pd(a[i]);
      acc[i][0] = _mm512_fmadd_pd(ai, b0, acc[i][0]);
      acc[i][1] = _mm512_fmadd_pd(ai, b1, acc[i][1]);
    }
    a += kRows;
    b += kCols;
  }
  for (std::size_t i = 0; i < kRows; ++i) {
    double* out = c + i * ldc;
    if (accumulate) {
      _mm512_storeu_pd(out, _mm512_add_pd(_mm512_loadu_pd(out), acc[i][0]));
      _mm512_storeu_pd(out + 8, _mm512_add_pd(_mm512_loadu_pd(out + 8), acc[i][1]));
    } else {
      _mm512_storeu_pd(out, acc[i][0]);
      _mm512_storeu_pd(out + 8, acc[i][1]);
    }
  }
}

}  // namespace

MicroKernel avx512_micro_kernel() { return {kRows, kCols, &micro_8x16}; }

#else

MicroKernel avx512_micro_kernel() { return {1, 1, nullptr}; }

#endif

}  // namespace devgan::kernels::detail
