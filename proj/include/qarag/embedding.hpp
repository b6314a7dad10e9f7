#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qarag::embedding {

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const noexcept { return values.size(); }
  // L2 norm within 1e-4 of 1.
  bool is_normalized() const noexcept;
  bool is_zero() const noexcept;

  bool operator==(const EmbeddingVector&) const = default;
};

// int8 absmax code: values ~= codes / quant_constant, quant_constant = 127 / absmax.
struct QuantizedVector {
  std::vector<std::int8_t> codes;
  float quant_constant = 1.0f;

  std::size_t dim() const noexcept { return codes.size(); }
  bool operator==(const QuantizedVector&) const = default;
};

enum class EmbedderKind { deterministic_local, remote_http };

struct EmbeddingProviderConfig {
  EmbedderKind kind = EmbedderKind::deterministic_local;
  std::size_t dim = 768;
  std::optional<std::string> endpoint;
  std::optional<std::string> model_name;
  std::uint64_t seed = 0;
  std::chrono::milliseconds timeout{30000};

  void validate() const;
};

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const;
  // Cheap reachability check; never throws.
  virtual bool probe(std::chrono::milliseconds timeout) const = 0;
  virtual std::size_t dim() const noexcept = 0;
};

// Feature-hashing embedder: lowercased whitespace tokens and token bigrams, FNV-1a 64 salted
// with the seed, signed bucket accumulation, then L2 normalization.
class LocalHashEmbedder final : public Embedder {
 public:
  LocalHashEmbedder(std::size_t dim, std::uint64_t seed);

  EmbeddingVector embed(std::string_view text) const override;
  bool probe(std::chrono::milliseconds) const override { return true; }
  std::size_t dim() const noexcept override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Speaks {"model", "input": [..]} -> {"data": [{"embedding": [..]}]}.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbeddingProviderConfig cfg);

  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
  bool probe(std::chrono::milliseconds timeout) const override;
  std::size_t dim() const noexcept override { return cfg_.dim; }

 private:
  EmbeddingProviderConfig cfg_;
};

std::unique_ptr<Embedder> make_embedder(const EmbeddingProviderConfig& cfg);

// 64-bit FNV-1a over the seed's little-endian bytes followed by the feature bytes.
std::uint64_t salted_fnv1a(std::string_view feature, std::uint64_t seed) noexcept;

EmbeddingVector embed_text(std::string_view text, const EmbeddingProviderConfig& cfg);

// In-place L2 normalization with a double accumulator; zero vectors are left untouched.
void l2_normalize(std::vector<float>& values) noexcept;

struct AbsmaxCodes {
  std::vector<std::int8_t> codes;
  float quant_constant;
};

// Shared absmax kernel; throws ZeroVectorError when absmax == 0.
AbsmaxCodes quantize_absmax(std::span<const float> values);

QuantizedVector quantize_absmax(const EmbeddingVector& v);
EmbeddingVector dequantize(const QuantizedVector& q);
// values_i = codes_i / quant_constant into a caller buffer (out.size() == codes.size()).
void dequantize_into(std::span<const std::int8_t> codes, float quant_constant, std::span<float> out);

// Clamped to [-1, 1]; throws on dim mismatch or zero norm.
float cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace qarag::embedding
