#include <vector>

#include "gemm_variants.hpp"

namespace devgan::kernels::detail {

// Reference product: both operands are materialized densely and every output
// element is reduced over k in ascending order with plain multiply-add.
void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const Operand& a, const Operand& b,
                 double* c, std::size_t ldc, bool accumulate) {
  std::vector<double> a_dense(m * k);
  std::vector<double> b_dense(k * n);
  pack_panel(a, false, 0, m, 0, k, k, a_dense.data());
  pack_panel(b, false, 0, k, 0, n, n, b_dense.data());

  std::vector<double> row(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a_dense[i * k + p];
      const double* bp = b_dense.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * bp[j];
    }
    double* out = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) out[j] = accumulate ? out[j] + row[j] : row[j];
  }
}

}  // namespace devgan::kernels::detail
