#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an OpenMP variant with
// identical per-element arithmetic, so the two produce bit-identical results.

#include <cstddef>
#include <exception>
#include <mutex>
#include <span>

namespace qarag::kernels {

enum class Backend { serial, openmp };

int max_threads() noexcept;

// Runs fn(i) for i in [0, n). Exceptions thrown by fn are captured and the first one is
// rethrown after the loop.
template <typename Fn>
void for_each_index(std::size_t n, Backend backend, Fn&& fn) {
  if (backend == Backend::serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

// c (m x n) = a (m x k) * b (k x n), row-major, double accumulation per output row.
void matmul_serial(std::span<const float> a, std::span<const float> b, std::span<float> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_openmp(std::span<const float> a, std::span<const float> b, std::span<float> c,
                   std::size_t m, std::size_t k, std::size_t n);

inline void matmul(std::span<const float> a, std::span<const float> b, std::span<float> c,
                   std::size_t m, std::size_t k, std::size_t n, Backend backend) {
  if (backend == Backend::serial) {
    matmul_serial(a, b, c, m, k, n);
  } else {
    matmul_openmp(a, b, c, m, k, n);
  }
}

}  // namespace qarag::kernels
