#include "qarag/kernels.hpp"

#include <omp.h>

#include <vector>

namespace qarag::kernels {
namespace {

inline void matmul_row(const float* a_row, std::span<const float> b, float* c_row, std::size_t k,
                       std::size_t n, std::vector<double>& acc) {
  acc.assign(n, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    if (av == 0.0) continue;
    const float* b_row = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) acc[j] += av * b_row[j];
  }
  for (std::size_t j = 0; j < n; ++j) c_row[j] = static_cast<float>(acc[j]);
}

}  // namespace

int max_threads() noexcept { return omp_get_max_threads(); }

void matmul_serial(std::span<const float> a, std::span<const float> b, std::span<float> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> acc;
  for (std::size_t i = 0; i < m; ++i) matmul_row(a.data() + i * k, b, c.data() + i * n, k, n, acc);
}

void matmul_openmp(std::span<const float> a, std::span<const float> b, std::span<float> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel
  {
    std::vector<double> acc;
#pragma omp for schedule(static)
    for (long long i = 0; i < rows; ++i) {
      const auto r = static_cast<std::size_t>(i);
      matmul_row(a.data() + r * k, b, c.data() + r * n, k, n, acc);
    }
  }
}

}  // namespace qarag::kernels
