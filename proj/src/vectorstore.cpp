#include "qarag/vectorstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "qarag/errors.hpp"

namespace qarag::vectorstore {
namespace {

constexpr char kMagic[4] = {'Q', 'A', 'V', 'X'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }
  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw CorruptDataError("truncated index file: expected " + std::to_string(n) +
                                 " byte(s) for " + what + " at byte offset " +
                                 std::to_string(pos_),
                             static_cast<std::int64_t>(pos_));
    }
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Metric m) noexcept { return m == Metric::dot ? "dot" : "cosine"; }

Metric parse_metric(std::string_view s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "dot") return Metric::dot;
  throw ConfigError("unknown metric \"" + std::string(s) + "\" (expected cosine or dot)");
}

VectorIndex::VectorIndex(std::size_t dim, Metric metric, bool quantized)
    : dim_(dim), metric_(metric), quantized_(quantized) {
  if (dim == 0) throw ConfigError("index dim must be > 0");
}

bool VectorIndex::contains(std::string_view chunk_id) const {
  return position_.contains(std::string(chunk_id));
}

void VectorIndex::add(std::string chunk_id, const embedding::EmbeddingVector& v) {
  if (v.dim() != dim_) {
    throw ConfigError("dim mismatch: index dim " + std::to_string(dim_) + ", vector dim " +
                      std::to_string(v.dim()));
  }
  if (position_.contains(chunk_id)) throw DuplicateIdError("duplicate chunk id \"" + chunk_id + "\"");
  if (chunk_id.size() > 0xFFFF) throw ConfigError("chunk id longer than 65535 bytes");
  if (!std::all_of(v.values.begin(), v.values.end(), [](float x) { return std::isfinite(x); })) {
    throw ConfigError("vector for \"" + chunk_id + "\" has non-finite entries");
  }
  if (quantized_) {
    if (v.is_zero()) {
      codes_.insert(codes_.end(), dim_, 0);
      quant_constants_.push_back(1.0f);
      zero_marker_.push_back(1);
    } else {
      auto q = embedding::quantize_absmax(std::span<const float>(v.values));
      codes_.insert(codes_.end(), q.codes.begin(), q.codes.end());
      quant_constants_.push_back(q.quant_constant);
      zero_marker_.push_back(0);
    }
  } else {
    raw_.insert(raw_.end(), v.values.begin(), v.values.end());
  }
  position_.emplace(chunk_id, ids_.size());
  ids_.push_back(std::move(chunk_id));
}

Payload VectorIndex::payload(std::size_t i) const {
  if (!quantized_) {
    const auto* p = raw_.data() + i * dim_;
    return embedding::EmbeddingVector{{p, p + dim_}};
  }
  if (zero_marker_[i]) return embedding::EmbeddingVector{std::vector<float>(dim_, 0.0f)};
  const auto* c = codes_.data() + i * dim_;
  return embedding::QuantizedVector{{c, c + dim_}, quant_constants_[i]};
}

float VectorIndex::score_entry(std::size_t i, std::span<const float> query, double query_norm,
                               std::vector<float>& scratch) const {
  std::span<const float> row;
  if (quantized_) {
    if (zero_marker_[i]) return 0.0f;
    scratch.resize(dim_);
    embedding::dequantize_into({codes_.data() + i * dim_, dim_}, quant_constants_[i], scratch);
    row = scratch;
  } else {
    row = {raw_.data() + i * dim_, dim_};
  }
  double dot = 0.0;
  double norm = 0.0;
  for (std::size_t j = 0; j < dim_; ++j) {
    dot += static_cast<double>(row[j]) * query[j];
    norm += static_cast<double>(row[j]) * row[j];
  }
  if (metric_ == Metric::dot) return static_cast<float>(dot);
  if (norm == 0.0 || query_norm == 0.0) return 0.0f;
  return static_cast<float>(std::clamp(dot / (std::sqrt(norm) * query_norm), -1.0, 1.0));
}

std::vector<float> VectorIndex::score_all(const embedding::EmbeddingVector& query,
                                          kernels::Backend backend) const {
  if (query.dim() != dim_) {
    throw ConfigError("dim mismatch: index dim " + std::to_string(dim_) + ", query dim " +
                      std::to_string(query.dim()));
  }
  double qn = 0.0;
  for (float x : query.values) qn += static_cast<double>(x) * x;
  qn = std::sqrt(qn);
  std::vector<float> scores(size());
  if (backend == kernels::Backend::serial) {
    std::vector<float> scratch;
    for (std::size_t i = 0; i < size(); ++i) scores[i] = score_entry(i, query.values, qn, scratch);
    return scores;
  }
  const auto n = static_cast<long long>(size());
#pragma omp parallel
  {
    std::vector<float> scratch;
#pragma omp for schedule(static)
    for (long long i = 0; i < n; ++i) {
      const auto r = static_cast<std::size_t>(i);
      scores[r] = score_entry(r, query.values, qn, scratch);
    }
  }
  return scores;
}

std::vector<SearchHit> VectorIndex::search_topk(const embedding::EmbeddingVector& query,
                                                std::size_t k, kernels::Backend backend) const {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (empty()) return {};
  const auto scores = score_all(query, backend);
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids_[a] < ids_[b];
                    });
  std::vector<SearchHit> hits;
  hits.reserve(take);
  for (std::size_t r = 0; r < take; ++r) hits.push_back({ids_[order[r]], scores[order[r]], r + 1});
  return hits;
}

std::string VectorIndex::serialize() const {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint16_t>(kFormatVersion);
  w.le<std::uint8_t>(static_cast<std::uint8_t>(metric_));
  w.le<std::uint8_t>(quantized_ ? 1 : 0);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(dim_));
  w.le<std::uint64_t>(size());
  for (std::size_t i = 0; i < size(); ++i) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(ids_[i].size()));
    w.bytes(ids_[i].data(), ids_[i].size());
    if (quantized_ && !zero_marker_[i]) {
      w.le<std::uint8_t>(0);
      w.f32(quant_constants_[i]);
      const auto* c = codes_.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) w.le<std::int8_t>(c[j]);
    } else if (quantized_) {
      w.le<std::uint8_t>(1);
      for (std::size_t j = 0; j < dim_; ++j) w.f32(0.0f);
    } else {
      w.le<std::uint8_t>(0);
      const auto* p = raw_.data() + i * dim_;
      for (std::size_t j = 0; j < dim_; ++j) w.f32(p[j]);
    }
  }
  return w.take();
}

VectorIndex VectorIndex::deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) {
    throw CorruptDataError("not an index file: bad magic (expected \"QAVX\")", 0);
  }
  const auto version = r.le<std::uint16_t>("version");
  if (version != kFormatVersion) {
    throw CorruptDataError("unsupported index format version " + std::to_string(version), 4);
  }
  const auto metric_byte = r.le<std::uint8_t>("metric");
  if (metric_byte > 1) throw CorruptDataError("unknown metric byte", 6);
  const auto quantized_byte = r.le<std::uint8_t>("quantized flag");
  if (quantized_byte > 1) throw CorruptDataError("bad quantized flag", 7);
  const auto dim = r.le<std::uint32_t>("dim");
  if (dim == 0) throw CorruptDataError("index dim is 0", 8);
  const auto count = r.le<std::uint64_t>("count");

  VectorIndex index(dim, static_cast<Metric>(metric_byte), quantized_byte == 1);
  std::vector<float> values(dim);
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::size_t entry_offset = r.offset();
    const auto id_len = r.le<std::uint16_t>("id length");
    std::string id(r.bytes(id_len, "id"));
    if (index.contains(id)) {
      throw CorruptDataError("duplicate chunk id \"" + id + "\"",
                             static_cast<std::int64_t>(entry_offset));
    }
    const auto marker = r.le<std::uint8_t>("zero-vector marker");
    if (marker > 1 || (marker == 1 && !index.quantized_)) {
      throw CorruptDataError("bad zero-vector marker", static_cast<std::int64_t>(r.offset() - 1));
    }
    if (index.quantized_ && marker == 0) {
      const std::size_t c_offset = r.offset();
      const float c = r.f32("quant constant");
      if (!(c > 0.0f) || !std::isfinite(c)) {
        throw CorruptDataError("invalid quantization constant", static_cast<std::int64_t>(c_offset));
      }
      const auto codes = r.bytes(dim, "codes");
      for (std::size_t j = 0; j < dim; ++j) {
        const auto code = static_cast<std::int8_t>(codes[j]);
        if (code == -128) {
          throw CorruptDataError("code out of range", static_cast<std::int64_t>(r.offset() - dim + j));
        }
        index.codes_.push_back(code);
      }
      index.quant_constants_.push_back(c);
      index.zero_marker_.push_back(0);
    } else {
      for (std::size_t j = 0; j < dim; ++j) values[j] = r.f32("vector payload");
      if (marker == 1) {
        index.codes_.insert(index.codes_.end(), dim, 0);
        index.quant_constants_.push_back(1.0f);
        index.zero_marker_.push_back(1);
      } else {
        index.raw_.insert(index.raw_.end(), values.begin(), values.end());
      }
    }
    index.position_.emplace(id, index.ids_.size());
    index.ids_.push_back(std::move(id));
  }
  if (!r.at_end()) {
    throw CorruptDataError("trailing bytes after last entry", static_cast<std::int64_t>(r.offset()));
  }
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  const std::string bytes = serialize();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open index file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace qarag::vectorstore
