#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "devgan/error.hpp"
#include "devgan/kernels/gemm.hpp"
#include "gemm_variants.hpp"

namespace devgan::kernels {

namespace {

constexpr std::size_t kDepthBlock = 256;
constexpr std::size_t kColumnBlock = 128;

std::once_flag g_init;
std::atomic<Isa> g_isa{Isa::scalar};
std::atomic<unsigned> g_threads{1};

void init_from_environment() {
  std::call_once(g_init, [] {
    Isa isa = best_isa();
    if (const char* env = std::getenv("DEVGAN_KERNEL"); env != nullptr && *env != '\0') {
      const auto requested = parse_isa(env);
      if (!requested || !isa_supported(*requested)) {
        throw Error(ErrorCode::unsupported_isa,
                    std::string("DEVGAN_KERNEL=") + env + " is not available on this CPU");
      }
      isa = *requested;
    }
    g_isa.store(isa);
    if (const char* env = std::getenv("DEVGAN_THREADS"); env != nullptr && *env != '\0') {
      const long value = std::strtol(env, nullptr, 10);
      g_threads.store(value >= 1 ? static_cast<unsigned>(value) : 1U);
    }
  });
}

// Packs A for one depth block: panel p holds rows [p*mr, p*mr+mr) laid out
// k-major so the micro-kernel reads mr consecutive values per step.
void pack_a_block(const Operand& a, std::size_t m, std::size_t k0, std::size_t kc,
                  std::size_t mr, double* dst) {
  for (std::size_t i0 = 0, p = 0; i0 < m; i0 += mr, ++p) {
    detail::pack_panel(a, /*swap=*/true, k0, kc, i0, std::min(mr, m - i0), mr,
                       dst + p * kc * mr);
  }
}

void run_column_panels(const detail::MicroKernel& kernel, std::size_t m, std::size_t n,
                       std::size_t k0, std::size_t kc, const Operand& b, const double* a_block,
                       double* c, std::size_t ldc, bool accumulate, std::size_t panel_begin,
                       std::size_t panel_end) {
  const std::size_t mr = kernel.mr;
  const std::size_t nr = kernel.nr;
  const std::size_t group = std::max<std::size_t>(1, kColumnBlock / nr);
  thread_local std::vector<double> b_block;
  thread_local std::vector<double> tile;
  b_block.resize(kc * nr * group);
  tile.resize(mr * nr);
  for (std::size_t g0 = panel_begin; g0 < panel_end; g0 += group) {
    const std::size_t g1 = std::min(panel_end, g0 + group);
    const std::size_t cols = std::min(n, g1 * nr) - g0 * nr;
    detail::pack_b_block(b, k0, kc, g0 * nr, cols, nr, b_block.data());
    for (std::size_t jp = g0; jp < g1; ++jp) {
      const std::size_t j0 = jp * nr;
      const std::size_t nv = std::min(nr, n - j0);
      const double* b_panel = b_block.data() + (jp - g0) * kc * nr;
      for (std::size_t i0 = 0, ip = 0; i0 < m; i0 += mr, ++ip) {
        const std::size_t mv = std::min(mr, m - i0);
        const double* a_panel = a_block + ip * kc * mr;
        double* out = c + i0 * ldc + j0;
        if (mv == mr && nv == nr) {
          kernel.fn(kc, a_panel, b_panel, out, ldc, accumulate);
          continue;
        }
        kernel.fn(kc, a_panel, b_panel, tile.data(), nr, false);
        for (std::size_t i = 0; i < mv; ++i) {
          for (std::size_t j = 0; j < nv; ++j) {
            double& dst = out[i * ldc + j];
            dst = accumulate ? dst + tile[i * nr + j] : tile[i * nr + j];
          }
        }
      }
    }
  }
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::avx512:
      return "avx512";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
    if (isa_name(isa) == name) return isa;
  }
  return std::nullopt;
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
#if defined(__x86_64__) || defined(__i386__)
    case Isa::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::avx512:
      return __builtin_cpu_supports("avx512f");
#else
    default:
      return false;
#endif
  }
  return false;
}

Isa best_isa() {
  if (isa_supported(Isa::avx512)) return Isa::avx512;
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  return Isa::scalar;
}

Isa active_isa() {
  init_from_environment();
  return g_isa.load();
}

void set_active_isa(Isa isa) {
  init_from_environment();
  if (!isa_supported(isa)) {
    throw Error(ErrorCode::unsupported_isa,
                "kernel variant " + std::string(isa_name(isa)) + " is not supported on this CPU");
  }
  g_isa.store(isa);
}

unsigned thread_count() {
  init_from_environment();
  return g_threads.load();
}

void set_thread_count(unsigned threads) {
  init_from_environment();
  g_threads.store(std::max(1U, threads));
}

namespace detail {

void gemm_blocked(const MicroKernel& kernel, std::size_t m, std::size_t n, std::size_t k,
                  const Operand& a, const Operand& b, double* c, std::size_t ldc,
                  bool accumulate) {
  const std::size_t m_panels = (m + kernel.mr - 1) / kernel.mr;
  const std::size_t n_panels = (n + kernel.nr - 1) / kernel.nr;
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(thread_count(), n_panels));
  thread_local std::vector<double> a_block;

  if (k == 0) {
    if (!accumulate) {
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0);
    }
    return;
  }
  for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
    const std::size_t kc = std::min(kDepthBlock, k - k0);
    const bool acc = accumulate || k0 > 0;
    a_block.resize(m_panels * kc * kernel.mr);
    pack_a_block(a, m, k0, kc, kernel.mr, a_block.data());
    if (threads <= 1) {
      run_column_panels(kernel, m, n, k0, kc, b, a_block.data(), c, ldc, acc, 0, n_panels);
      continue;
    }
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    const double* shared_a = a_block.data();
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = n_panels * t / threads;
      const std::size_t end = n_panels * (t + 1) / threads;
      workers.emplace_back([&, begin, end] {
        run_column_panels(kernel, m, n, k0, kc, b, shared_a, c, ldc, acc, begin, end);
      });
    }
  }
}

}  // namespace detail

void gemm(Isa isa, std::size_t m, std::size_t n, std::size_t k, const Operand& a,
          const Operand& b, double* c, std::size_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
  switch (isa) {
    case Isa::scalar:
      detail::gemm_scalar(m, n, k, a, b, c, ldc, accumulate);
      return;
    case Isa::avx2:
      detail::gemm_blocked(detail::avx2_micro_kernel(), m, n, k, a, b, c, ldc, accumulate);
      return;
    case Isa::avx512:
      detail::gemm_blocked(detail::avx512_micro_kernel(), m, n, k, a, b, c, ldc, accumulate);
      return;
  }
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const Operand& a, const Operand& b,
          double* c, std::size_t ldc, bool accumulate) {
  gemm(active_isa(), m, n, k, a, b, c, ldc, accumulate);
}

}  // namespace devgan::kernels
