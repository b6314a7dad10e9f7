#include "qarag/lowrank.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qarag/embedding.hpp"
#include "qarag/errors.hpp"

namespace qarag::lowrank {
namespace {

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_forward_shapes(const DenseMatrix& x, std::size_t w_rows, std::size_t w_cols,
                          const LowRankAdapter& a) {
  a.validate();
  if (x.cols() != w_rows) {
    throw ConfigError("shape mismatch: X is " + shape(x) + " but W has " + std::to_string(w_rows) +
                      " rows");
  }
  if (a.l1.rows() != w_rows) {
    throw ConfigError("shape mismatch: L1 is " + shape(a.l1) + " but W has " +
                      std::to_string(w_rows) + " rows");
  }
  if (a.l2.cols() != w_cols) {
    throw ConfigError("shape mismatch: L2 is " + shape(a.l2) + " but W has " +
                      std::to_string(w_cols) + " cols");
  }
}

// y += s * (x * l1) * l2
void add_adapter_path(const DenseMatrix& x, const LowRankAdapter& a, DenseMatrix& y,
                      kernels::Backend backend) {
  const float s = a.scale();
  if (s == 0.0f) return;
  const DenseMatrix xl1 = matmul(x, a.l1, backend);
  const DenseMatrix delta = matmul(xl1, a.l2, backend);
  auto out = y.data();
  const auto d = delta.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(out[i]) + static_cast<double>(s) * d[i]);
  }
}

void put_f32(std::string& out, float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

float get_f32(std::string_view in, std::size_t at) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return std::bit_cast<float>(u);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ConfigError("matrix data length " + std::to_string(data_.size()) + " != " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (float v : data_) {
    if (!std::isfinite(v)) throw ConfigError("matrix has non-finite entries");
  }
}

double DenseMatrix::frobenius_norm() const noexcept {
  double sq = 0.0;
  for (float v : data_) sq += static_cast<double>(v) * v;
  return std::sqrt(sq);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, kernels::Backend backend) {
  if (a.cols() != b.rows()) {
    throw ConfigError("shape mismatch: cannot multiply " + shape(a) + " by " + shape(b));
  }
  DenseMatrix c(a.rows(), b.cols());
  kernels::matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), backend);
  return c;
}

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError("shape mismatch: " + shape(a) + " vs " + shape(b));
  }
  double sq = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - db[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

float effective_scale(float alpha, std::size_t rank) {
  if (rank == 0) throw ConfigError("adapter rank must be >= 1");
  return alpha / static_cast<float>(rank);
}

void LowRankAdapter::validate() const {
  if (l1.cols() == 0) throw ConfigError("adapter rank must be >= 1");
  if (l1.cols() != l2.rows()) {
    throw ConfigError("shape mismatch: L1 is " + shape(l1) + ", L2 is " + shape(l2));
  }
}

QuantizedLinear QuantizedLinear::quantize(const DenseMatrix& w) {
  auto q = embedding::quantize_absmax(w.data());
  return {w.rows(), w.cols(), std::move(q.codes), q.quant_constant};
}

DenseMatrix QuantizedLinear::dequantize() const {
  if (codes.size() != rows * cols) throw CorruptDataError("quantized matrix code count mismatch");
  DenseMatrix w(rows, cols);
  embedding::dequantize_into(codes, quant_constant, w.data());
  return w;
}

DenseMatrix adapted_forward(const DenseMatrix& x, const DenseMatrix& w, const LowRankAdapter& a,
                            kernels::Backend backend) {
  check_forward_shapes(x, w.rows(), w.cols(), a);
  DenseMatrix y = matmul(x, w, backend);
  add_adapter_path(x, a, y, backend);
  return y;
}

DenseMatrix merge(const DenseMatrix& w, const LowRankAdapter& a, kernels::Backend backend) {
  a.validate();
  if (a.l1.rows() != w.rows() || a.l2.cols() != w.cols()) {
    throw ConfigError("shape mismatch: W is " + shape(w) + ", adapter is " + shape(a.l1) + " * " +
                      shape(a.l2));
  }
  DenseMatrix merged = w;
  const float s = a.scale();
  if (s == 0.0f) return merged;
  const DenseMatrix delta = matmul(a.l1, a.l2, backend);
  auto out = merged.data();
  const auto d = delta.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(out[i]) + static_cast<double>(s) * d[i]);
  }
  return merged;
}

DenseMatrix quantized_forward(const DenseMatrix& x, const QuantizedLinear& wq,
                              const LowRankAdapter& a, kernels::Backend backend) {
  check_forward_shapes(x, wq.rows, wq.cols, a);
  DenseMatrix y = matmul(x, wq.dequantize(), backend);
  add_adapter_path(x, a, y, backend);
  return y;
}

double trainable_fraction(std::size_t h, std::size_t o, std::size_t r) {
  if (h == 0 || o == 0 || r == 0) throw ConfigError("trainable_fraction: h, o, r must be >= 1");
  return static_cast<double>(r) * static_cast<double>(h + o) /
         (static_cast<double>(h) * static_cast<double>(o));
}

std::string serialize_adapter(const LowRankAdapter& a) {
  a.validate();
  nlohmann::ordered_json header;
  header["h"] = a.l1.rows();
  header["o"] = a.l2.cols();
  header["rank"] = a.rank();
  header["alpha"] = a.alpha;
  std::string out = header.dump();
  out += "\n\n";
  for (float v : a.l1.data()) put_f32(out, v);
  for (float v : a.l2.data()) put_f32(out, v);
  return out;
}

LowRankAdapter deserialize_adapter(std::string_view bytes) {
  const std::size_t sep = bytes.find("\n\n");
  if (sep == std::string_view::npos) throw CorruptDataError("adapter file has no header separator", 0);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, sep));
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptDataError(std::string("adapter header is not JSON: ") + e.what(), 0);
  }
  std::size_t h = 0, o = 0, r = 0;
  float alpha = 0.0f;
  try {
    h = header.at("h").get<std::size_t>();
    o = header.at("o").get<std::size_t>();
    r = header.at("rank").get<std::size_t>();
    alpha = header.at("alpha").get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptDataError(std::string("adapter header: ") + e.what(), 0);
  }
  if (h == 0 || o == 0 || r == 0) throw CorruptDataError("adapter header has zero dimension", 0);
  const std::size_t payload = sep + 2;
  const std::size_t need = 4 * (h * r + r * o);
  if (bytes.size() - payload != need) {
    throw CorruptDataError("adapter payload is " + std::to_string(bytes.size() - payload) +
                               " bytes, expected " + std::to_string(need),
                           static_cast<std::int64_t>(payload));
  }
  std::vector<float> l1(h * r), l2(r * o);
  std::size_t at = payload;
  for (float& v : l1) {
    v = get_f32(bytes, at);
    at += 4;
  }
  for (float& v : l2) {
    v = get_f32(bytes, at);
    at += 4;
  }
  return {DenseMatrix(h, r, std::move(l1)), DenseMatrix(r, o, std::move(l2)), alpha};
}

void save_adapter(const LowRankAdapter& a, const std::filesystem::path& path) {
  const std::string bytes = serialize_adapter(a);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

LowRankAdapter load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open adapter file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_adapter(ss.str());
}

}  // namespace qarag::lowrank
