#pragma once

#include <filesystem>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qarag/corpus.hpp"
#include "qarag/embedding.hpp"
#include "qarag/vectorstore.hpp"

namespace qarag {

struct RetrievedChunk {
  std::string chunk_id;
  float score = 0.0f;
  std::size_t rank = 0;
  std::string text;

  bool operator==(const RetrievedChunk&) const = default;
};

enum class IngestKind { qa, catalog, text };

IngestKind parse_ingest_kind(std::string_view s);

struct IngestRequest {
  IngestKind kind = IngestKind::qa;
  std::string format;  // qa: jsonl|json_array, catalog: csv|json_array, text: ignored
  std::string source;  // id prefix; defaults per kind ("ds", "catalog", "doc")
  std::string payload;
};

// Vector index plus the chunk texts it points at. Many concurrent readers or one writer.
// Persisted as the binary index file and a "<index>.chunks.jsonl" sidecar.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(vectorstore::VectorIndex index);
  KnowledgeBase(KnowledgeBase&& other);
  KnowledgeBase& operator=(KnowledgeBase&&) = delete;

  // Loads path (and its sidecar) when it exists, otherwise starts an empty index.
  static KnowledgeBase open_or_create(const std::filesystem::path& path, std::size_t dim,
                                      vectorstore::Metric metric = vectorstore::Metric::cosine,
                                      bool quantized = false);
  static KnowledgeBase load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static std::filesystem::path sidecar_path(const std::filesystem::path& index_path);

  std::size_t size() const;
  std::size_t dim() const;
  vectorstore::Metric metric() const;
  bool quantized() const;

  std::vector<RetrievedChunk> search(const embedding::EmbeddingVector& query, std::size_t k) const;

  // All-or-nothing: duplicate ids (against the index or within the batch) throw
  // DuplicateIdError before anything is added.
  void add_chunks(const std::vector<corpus::DocumentChunk>& chunks,
                  const std::vector<embedding::EmbeddingVector>& vectors);

  std::string chunk_text(std::string_view chunk_id) const;

 private:
  mutable std::shared_mutex mu_;
  vectorstore::VectorIndex index_;
  std::unordered_map<std::string, corpus::DocumentChunk> chunks_;
};

// Parses the payload with the corpus module, flattens records, chunks them, embeds every chunk
// and returns the chunks ready for KnowledgeBase::add_chunks.
struct PreparedIngest {
  std::vector<corpus::DocumentChunk> chunks;
  std::vector<embedding::EmbeddingVector> vectors;
};

PreparedIngest prepare_ingest(const IngestRequest& request, const corpus::ChunkingConfig& chunking,
                              const embedding::Embedder& embedder);

}  // namespace qarag
