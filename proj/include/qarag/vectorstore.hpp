#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "qarag/embedding.hpp"
#include "qarag/kernels.hpp"

namespace qarag::vectorstore {

enum class Metric : std::uint8_t { cosine = 0, dot = 1 };

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view s);

struct SearchHit {
  std::string chunk_id;
  float score = 0.0f;
  std::size_t rank = 0;  // 1-based

  bool operator==(const SearchHit&) const = default;
};

using Payload = std::variant<embedding::EmbeddingVector, embedding::QuantizedVector>;

// Exact flat index. Entries keep insertion order; chunk ids are unique. In a quantized index
// every nonzero vector is stored as int8 absmax codes; zero vectors are kept raw.
class VectorIndex {
 public:
  static constexpr std::uint16_t kFormatVersion = 1;

  VectorIndex(std::size_t dim, Metric metric = Metric::cosine, bool quantized = false);

  std::size_t dim() const noexcept { return dim_; }
  Metric metric() const noexcept { return metric_; }
  bool quantized() const noexcept { return quantized_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool contains(std::string_view chunk_id) const;
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  // Throws DuplicateIdError or ConfigError (dim mismatch / non-finite values).
  void add(std::string chunk_id, const embedding::EmbeddingVector& v);

  Payload payload(std::size_t i) const;

  // Scores every entry under the index metric (quantized entries are dequantized first).
  // Zero-norm entries or queries score 0 under cosine.
  std::vector<float> score_all(const embedding::EmbeddingVector& query,
                               kernels::Backend backend = kernels::Backend::openmp) const;

  // The min(k, size) best entries, score descending, ties by ascending chunk id.
  std::vector<SearchHit> search_topk(const embedding::EmbeddingVector& query, std::size_t k,
                                     kernels::Backend backend = kernels::Backend::openmp) const;

  // Writes to a sibling temp file, then renames over path.
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

  std::string serialize() const;
  static VectorIndex deserialize(std::string_view bytes);

  bool operator==(const VectorIndex&) const = default;

 private:
  float score_entry(std::size_t i, std::span<const float> query, double query_norm,
                    std::vector<float>& scratch) const;

  std::size_t dim_;
  Metric metric_;
  bool quantized_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> position_;
  std::vector<float> raw_;                 // size()*dim when !quantized_
  std::vector<std::int8_t> codes_;         // size()*dim when quantized_
  std::vector<float> quant_constants_;     // per entry when quantized_
  std::vector<std::uint8_t> zero_marker_;  // per entry when quantized_
};

}  // namespace qarag::vectorstore
