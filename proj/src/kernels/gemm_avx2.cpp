#include "gemm_variants.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define DEVGAN_HAVE_X86 1
#endif

namespace devgan::kernels::detail {

#if DEVGAN_HAVE_X86

namespace {

constexpr std::size_t kRows = 6;
constexpr std::size_t kCols = 8;

__attribute__((target("avx2,fma"))) void micro_6x8(std::size_t kc, const double* a,
                                                   const double* b, double* c, std::size_t ldc,
                                                   bool accumulate) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
  __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();

  for (std::size_t p = 0; p < kc; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b);
    const __m256d b1 = _mm256_loadu_pd(b + 4);
    __m256d ai = _mm256_broadcast_sd(a + 0);
    c00 = _mm256_fmadd_pd(ai, b0, c00);
    c01 = _mm256_fmadd_pd(ai, b1, c01);
    ai = _mm256_broadcast_sd(a + 1);
    c10 = _mm256_fmadd_pd(ai, b0, c10);
    c11 = _mm256_fmadd_pd(ai, b1, c11);
    ai = _mm256_broadcast_sd(a + 2);
    c20 = _mm256_fmadd_pd(ai, b0, c20);
    c21 = _mm256_fmadd_pd(ai, b1, c21);
    ai = _mm256_broadcast_sd(a + 3);
    c30 = _mm256_fmadd_pd(ai, b0, c30);
    c31 = _mm256_fmadd_pd(ai, b1, c31);
    ai = _mm256_broadcast_sd(a + 4);
    c40 = _mm256_fmadd_pd(ai, b0, c40);
    c41 = _mm256_fmadd_pd(ai, b1, c41);
    ai = _mm256_broadcast_sd(a + 5);
    c50 = _mm256_fmadd_pd(ai, b0, c50);
    c51 = _mm256_fmadd_pd(ai, b1, c51);
    a += kRows;
    b += kCols;
  }

  const __m256d rows[kRows][2] = {{c00, c01}, {c10, c11}, {c20, c21},
                                  {c30, c31}, {c40, c41}, {c50, c51}};
  for (std::size_t i = 0; i < kRows; ++i) {
    double* out = c + i * ldc;
    if (accumulate) {
      _mm256_storeu_pd(out, _mm256_add_pd(_mm256_loadu_pd(out), rows[i][0]));
      _mm256_storeu_pd(out + 4, _mm256_add_pd(_mm256_loadu_pd(out + 4), rows[i][1]));
    } else {
      _mm256_storeu_pd(out, rows[i][0]);
      _mm256_storeu_pd(out + 4, rows[i][1]);
    }
  }
}

}  // namespace

MicroKernel avx2_micro_kernel() { return {kRows, kCols, &micro_6x8}; }

#else

MicroKernel avx2_micro_kernel() { return {1, 1, nullptr}; }

#endif

}  // namespace devgan::kernels::detail
