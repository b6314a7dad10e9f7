#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qarag/kernels.hpp"

namespace qarag::lowrank {

// Row-major float matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols);  // zero-filled
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  float& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  double frobenius_norm() const noexcept;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b,
                   kernels::Backend backend = kernels::Backend::openmp);

// ||a - b||_F in double.
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);

// s = alpha / rank. Throws ConfigError for rank 0.
float effective_scale(float alpha, std::size_t rank);

struct LowRankAdapter {
  DenseMatrix l1;  // h x r
  DenseMatrix l2;  // r x o
  float alpha = 0.0f;

  std::size_t rank() const noexcept { return l1.cols(); }
  float scale() const { return effective_scale(alpha, rank()); }
  // Throws ConfigError unless l1.cols == l2.rows >= 1.
  void validate() const;
};

// int8 absmax storage of a base weight matrix with one constant per matrix.
struct QuantizedLinear {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> codes;
  float quant_constant = 1.0f;

  static QuantizedLinear quantize(const DenseMatrix& w);
  DenseMatrix dequantize() const;
  std::size_t storage_bytes() const noexcept { return codes.size() + sizeof(float); }
};

// X*W + s*(X*L1)*L2; the h x o product L1*L2 is never formed.
DenseMatrix adapted_forward(const DenseMatrix& x, const DenseMatrix& w, const LowRankAdapter& a,
                            kernels::Backend backend = kernels::Backend::openmp);

// W + s*L1*L2.
DenseMatrix merge(const DenseMatrix& w, const LowRankAdapter& a,
                  kernels::Backend backend = kernels::Backend::openmp);

// X*dequant(Wq) + s*(X*L1)*L2; the adapter path stays in full precision.
DenseMatrix quantized_forward(const DenseMatrix& x, const QuantizedLinear& wq,
                              const LowRankAdapter& a,
                              kernels::Backend backend = kernels::Backend::openmp);

// r*(h+o) / (h*o); not clamped, so it exceeds 1 once r > h*o/(h+o).
double trainable_fraction(std::size_t h, std::size_t o, std::size_t r);

// JSON header line {"h","o","rank","alpha"}, a blank line, then L1 and L2 as little-endian
// f32, row-major.
void save_adapter(const LowRankAdapter& a, const std::filesystem::path& path);
LowRankAdapter load_adapter(const std::filesystem::path& path);
std::string serialize_adapter(const LowRankAdapter& a);
LowRankAdapter deserialize_adapter(std::string_view bytes);

}  // namespace qarag::lowrank
