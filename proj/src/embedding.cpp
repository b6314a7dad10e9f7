#include "qarag/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "qarag/errors.hpp"
#include "qarag/http.hpp"
#include "qarag/text.hpp"

namespace qarag::embedding {

bool EmbeddingVector::is_normalized() const noexcept {
  double sq = 0.0;
  for (float v : values) sq += static_cast<double>(v) * v;
  return std::abs(std::sqrt(sq) - 1.0) <= 1e-4;
}

bool EmbeddingVector::is_zero() const noexcept {
  return std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; });
}

void EmbeddingProviderConfig::validate() const {
  if (dim == 0) throw ConfigError("embedding dim must be > 0");
  if (kind == EmbedderKind::remote_http && (!endpoint || endpoint->empty())) {
    throw ConfigError("remote_http embedder requires an endpoint");
  }
}

std::vector<EmbeddingVector> Embedder::embed_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

std::uint64_t salted_fnv1a(std::string_view feature, std::uint64_t seed) noexcept {
  constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t h = kOffset;
  for (int i = 0; i < 8; ++i) {
    h ^= (seed >> (8 * i)) & 0xFF;
    h *= kPrime;
  }
  for (unsigned char c : feature) {
    h ^= c;
    h *= kPrime;
  }
  return h;
}

void l2_normalize(std::vector<float>& values) noexcept {
  double sq = 0.0;
  for (float v : values) sq += static_cast<double>(v) * v;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& v : values) v = static_cast<float>(v * inv);
}

LocalHashEmbedder::LocalHashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw ConfigError("embedding dim must be > 0");
}

EmbeddingVector LocalHashEmbedder::embed(std::string_view input) const {
  const auto tokens = text::split_whitespace(text::ascii_lower(input));
  std::vector<std::int64_t> acc(dim_, 0);
  auto add = [&](std::string_view feature) {
    const std::uint64_t h = salted_fnv1a(feature, seed_);
    acc[h % dim_] += (h >> 63) == 0 ? 1 : -1;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add(tokens[i]);
    if (i + 1 < tokens.size()) add(tokens[i] + " " + tokens[i + 1]);
  }
  EmbeddingVector out;
  out.values.resize(dim_);
  std::transform(acc.begin(), acc.end(), out.values.begin(),
                 [](std::int64_t v) { return static_cast<float>(v); });
  l2_normalize(out.values);
  return out;
}

RemoteEmbedder::RemoteEmbedder(EmbeddingProviderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  http::parse_url(*cfg_.endpoint);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
  nlohmann::json body;
  body["model"] = cfg_.model_name.value_or("");
  body["input"] = std::vector<std::string>(texts.begin(), texts.end());
  const auto response = http::post_json(*cfg_.endpoint, body, cfg_.timeout);
  const auto data = response.find("data");
  if (data == response.end() || !data->is_array() || data->size() != texts.size()) {
    throw RetryableError("embedding response has no matching \"data\" array", *cfg_.endpoint, 200);
  }
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& item : *data) {
    const auto emb = item.find("embedding");
    if (emb == item.end() || !emb->is_array()) {
      throw RetryableError("embedding response item lacks \"embedding\"", *cfg_.endpoint, 200);
    }
    if (emb->size() != cfg_.dim) {
      throw ConfigError("remote embedder returned dim " + std::to_string(emb->size()) +
                        ", configured dim is " + std::to_string(cfg_.dim));
    }
    EmbeddingVector v;
    v.values.reserve(cfg_.dim);
    for (const auto& x : *emb) {
      if (!x.is_number()) {
        throw RetryableError("embedding contains a non-number", *cfg_.endpoint, 200);
      }
      const auto f = x.get<float>();
      if (!std::isfinite(f)) throw RetryableError("embedding is not finite", *cfg_.endpoint, 200);
      v.values.push_back(f);
    }
    l2_normalize(v.values);
    out.push_back(std::move(v));
  }
  return out;
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  const std::string one(text);
  return std::move(embed_batch(std::span<const std::string>(&one, 1)).front());
}

bool RemoteEmbedder::probe(std::chrono::milliseconds timeout) const {
  return http::reachable(*cfg_.endpoint, timeout);
}

std::unique_ptr<Embedder> make_embedder(const EmbeddingProviderConfig& cfg) {
  cfg.validate();
  if (cfg.kind == EmbedderKind::remote_http) return std::make_unique<RemoteEmbedder>(cfg);
  return std::make_unique<LocalHashEmbedder>(cfg.dim, cfg.seed);
}

EmbeddingVector embed_text(std::string_view text, const EmbeddingProviderConfig& cfg) {
  return make_embedder(cfg)->embed(text);
}

AbsmaxCodes quantize_absmax(std::span<const float> values) {
  float absmax = 0.0f;
  for (float v : values) absmax = std::max(absmax, std::abs(v));
  if (!(absmax > 0.0f) || !std::isfinite(absmax)) {
    throw ZeroVectorError();
  }
  AbsmaxCodes out;
  out.quant_constant = 127.0f / absmax;
  out.codes.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    // std::round is half-away-from-zero.
    const float r = std::round(out.quant_constant * values[i]);
    out.codes[i] = static_cast<std::int8_t>(std::clamp(r, -127.0f, 127.0f));
  }
  return out;
}

QuantizedVector quantize_absmax(const EmbeddingVector& v) {
  auto q = quantize_absmax(std::span<const float>(v.values));
  return {std::move(q.codes), q.quant_constant};
}

void dequantize_into(std::span<const std::int8_t> codes, float quant_constant,
                     std::span<float> out) {
  if (!(quant_constant > 0.0f) || !std::isfinite(quant_constant)) {
    throw CorruptDataError("invalid quantization constant " + std::to_string(quant_constant));
  }
  for (std::size_t i = 0; i < codes.size(); ++i) out[i] = static_cast<float>(codes[i]) / quant_constant;
}

EmbeddingVector dequantize(const QuantizedVector& q) {
  EmbeddingVector out;
  out.values.resize(q.codes.size());
  dequantize_into(q.codes, q.quant_constant, out.values);
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ConfigError("cosine_similarity: dim mismatch " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ConfigError("cosine_similarity: zero-norm input");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

float cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return static_cast<float>(
      cosine_similarity(std::span<const float>(a.values), std::span<const float>(b.values)));
}

}  // namespace qarag::embedding
