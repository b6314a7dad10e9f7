#include "qarag/knowledge_base.hpp"

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qarag/errors.hpp"

namespace qarag {

IngestKind parse_ingest_kind(std::string_view s) {
  if (s == "qa") return IngestKind::qa;
  if (s == "catalog") return IngestKind::catalog;
  if (s == "text") return IngestKind::text;
  throw ConfigError("unknown ingest kind \"" + std::string(s) + "\" (expected qa, catalog or text)");
}

KnowledgeBase::KnowledgeBase(vectorstore::VectorIndex index) : index_(std::move(index)) {}

// Only used while returning freshly built instances, so other is never shared yet.
KnowledgeBase::KnowledgeBase(KnowledgeBase&& other)
    : index_(std::move(other.index_)), chunks_(std::move(other.chunks_)) {}

std::filesystem::path KnowledgeBase::sidecar_path(const std::filesystem::path& index_path) {
  auto p = index_path;
  p += ".chunks.jsonl";
  return p;
}

KnowledgeBase KnowledgeBase::open_or_create(const std::filesystem::path& path, std::size_t dim,
                                            vectorstore::Metric metric, bool quantized) {
  if (std::filesystem::exists(path)) {
    KnowledgeBase kb = load(path);
    if (kb.dim() != dim) {
      throw ConfigError("index " + path.string() + " has dim " + std::to_string(kb.dim()) +
                        " but the embedder produces dim " + std::to_string(dim));
    }
    return kb;
  }
  return KnowledgeBase(vectorstore::VectorIndex(dim, metric, quantized));
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) {
  KnowledgeBase kb(vectorstore::VectorIndex::load(path));
  const auto sidecar = sidecar_path(path);
  std::ifstream in(sidecar);
  if (!in) {
    if (!kb.index_.empty()) throw CorruptDataError("missing chunk sidecar " + sidecar.string());
    return kb;
  }
  std::string line;
  std::int64_t offset = 0;
  while (std::getline(in, line)) {
    const auto line_offset = offset;
    offset += static_cast<std::int64_t>(line.size()) + 1;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      corpus::DocumentChunk c;
      c.id = j.at("id").get<std::string>();
      c.source_id = j.at("source_id").get<std::string>();
      c.seq_no = j.at("seq_no").get<std::size_t>();
      c.text = j.at("text").get<std::string>();
      c.char_range = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
      kb.chunks_.emplace(c.id, std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw CorruptDataError("chunk sidecar " + sidecar.string() + ": " + e.what(), line_offset);
    }
  }
  for (const auto& id : kb.index_.ids()) {
    if (!kb.chunks_.contains(id)) {
      throw CorruptDataError("chunk sidecar has no text for \"" + id + "\"");
    }
  }
  return kb;
}

void KnowledgeBase::save(const std::filesystem::path& path) const {
  std::shared_lock lock(mu_);
  const auto sidecar = sidecar_path(path);
  auto tmp = sidecar;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    for (const auto& id : index_.ids()) {
      const auto& c = chunks_.at(id);
      nlohmann::ordered_json j;
      j["id"] = c.id;
      j["source_id"] = c.source_id;
      j["seq_no"] = c.seq_no;
      j["start"] = c.char_range.start;
      j["end"] = c.char_range.end;
      j["text"] = c.text;
      out << j.dump() << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  // Sidecar first: a crash between the two renames leaves a superset of texts, which loads.
  std::filesystem::rename(tmp, sidecar);
  index_.save(path);
}

std::size_t KnowledgeBase::size() const {
  std::shared_lock lock(mu_);
  return index_.size();
}

std::size_t KnowledgeBase::dim() const {
  std::shared_lock lock(mu_);
  return index_.dim();
}

vectorstore::Metric KnowledgeBase::metric() const {
  std::shared_lock lock(mu_);
  return index_.metric();
}

bool KnowledgeBase::quantized() const {
  std::shared_lock lock(mu_);
  return index_.quantized();
}

std::vector<RetrievedChunk> KnowledgeBase::search(const embedding::EmbeddingVector& query,
                                                  std::size_t k) const {
  std::shared_lock lock(mu_);
  std::vector<RetrievedChunk> out;
  for (auto& hit : index_.search_topk(query, k)) {
    out.push_back({hit.chunk_id, hit.score, hit.rank, chunks_.at(hit.chunk_id).text});
  }
  return out;
}

void KnowledgeBase::add_chunks(const std::vector<corpus::DocumentChunk>& chunks,
                               const std::vector<embedding::EmbeddingVector>& vectors) {
  if (chunks.size() != vectors.size()) throw ConfigError("add_chunks: chunk/vector count mismatch");
  std::unique_lock lock(mu_);
  std::set<std::string_view> batch;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (index_.contains(chunks[i].id) || !batch.insert(chunks[i].id).second) {
      throw DuplicateIdError("duplicate chunk id \"" + chunks[i].id + "\"");
    }
    if (vectors[i].dim() != index_.dim()) {
      throw ConfigError("dim mismatch: index dim " + std::to_string(index_.dim()) +
                        ", vector dim " + std::to_string(vectors[i].dim()));
    }
  }
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    index_.add(chunks[i].id, vectors[i]);
    chunks_.emplace(chunks[i].id, chunks[i]);
  }
}

std::string KnowledgeBase::chunk_text(std::string_view chunk_id) const {
  std::shared_lock lock(mu_);
  auto it = chunks_.find(std::string(chunk_id));
  if (it == chunks_.end()) throw ConfigError("unknown chunk id \"" + std::string(chunk_id) + "\"");
  return it->second.text;
}

PreparedIngest prepare_ingest(const IngestRequest& request, const corpus::ChunkingConfig& chunking,
                              const embedding::Embedder& embedder) {
  PreparedIngest out;
  auto append = [&](const std::string& flat, const std::string& source_id) {
    for (auto& c : corpus::chunk_text(flat, chunking, source_id)) out.chunks.push_back(std::move(c));
  };
  switch (request.kind) {
    case IngestKind::qa: {
      const std::string source = request.source.empty() ? "ds" : request.source;
      corpus::QaFormat fmt = corpus::QaFormat::jsonl;
      if (request.format == "json_array") {
        fmt = corpus::QaFormat::json_array;
      } else if (!request.format.empty() && request.format != "jsonl") {
        throw ConfigError("unknown qa format \"" + request.format + "\" (expected jsonl or json_array)");
      }
      for (const auto& pair : corpus::parse_qa_dataset(request.payload, fmt, source)) {
        append(corpus::flatten_for_embedding(pair), pair.id);
      }
      break;
    }
    case IngestKind::catalog: {
      const std::string source = request.source.empty() ? "catalog" : request.source;
      corpus::CatalogFormat fmt = corpus::CatalogFormat::csv;
      if (request.format == "json_array") {
        fmt = corpus::CatalogFormat::json_array;
      } else if (!request.format.empty() && request.format != "csv") {
        throw ConfigError("unknown catalog format \"" + request.format + "\" (expected csv or json_array)");
      }
      const auto records = corpus::parse_catalog(request.payload, fmt);
      for (std::size_t i = 0; i < records.size(); ++i) {
        append(corpus::flatten_for_embedding(records[i]), source + ":" + std::to_string(i));
      }
      break;
    }
    case IngestKind::text:
      append(request.payload, request.source.empty() ? "doc" : request.source);
      break;
  }
  std::vector<std::string> texts;
  texts.reserve(out.chunks.size());
  for (const auto& c : out.chunks) texts.push_back(c.text);
  if (!texts.empty()) out.vectors = embedder.embed_batch(texts);
  return out;
}

}  // namespace qarag
