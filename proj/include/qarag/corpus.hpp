#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qarag::corpus {

struct QAPair {
  std::string id;
  std::string question;
  std::string answer;  // reference answer
  std::optional<std::string> course_id;
  std::vector<std::string> tags;

  bool operator==(const QAPair&) const = default;
};

enum class CourseType { Certification, Professional, General };

std::string_view to_string(CourseType t) noexcept;
// Case-insensitive; accepts "Certification" and "Certification Course" forms.
CourseType parse_course_type(std::string_view s);

struct CourseRecord {
  std::string technical_direction;
  std::string course_name;
  std::string version;
  CourseType course_type = CourseType::General;
  std::vector<std::string> languages;  // deduplicated, first occurrence wins

  bool operator==(const CourseRecord&) const = default;
};

// Half-open interval in code points of the source text.
struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  bool operator==(const CharRange&) const = default;
};

struct DocumentChunk {
  std::string id;  // "<source_id>#<seq_no>"
  std::string source_id;
  std::size_t seq_no = 0;
  std::string text;
  CharRange char_range;

  bool operator==(const DocumentChunk&) const = default;
};

enum class BoundaryMode { hard, word_preserving };

struct ChunkingConfig {
  std::size_t chunk_size = 200;
  std::size_t overlap = 0;
  BoundaryMode boundary_mode = BoundaryMode::hard;

  // Throws ConfigError unless chunk_size > 0 and overlap < chunk_size.
  void validate() const;
};

enum class QaFormat { jsonl, json_array };
enum class CatalogFormat { csv, json_array };

// Records without an "id" get "<source>:<ordinal>" (0-based ordinal).
// Throws ParseError (with byte offset and ordinal) or DuplicateIdError.
std::vector<QAPair> parse_qa_dataset(std::string_view raw, QaFormat format,
                                     std::string_view source = "ds");

std::vector<CourseRecord> parse_catalog(std::string_view raw, CatalogFormat format);

std::vector<DocumentChunk> chunk_text(std::string_view text, const ChunkingConfig& config,
                                      std::string_view source_id = "doc");

std::string flatten_for_embedding(const QAPair& item);
std::string flatten_for_embedding(const CourseRecord& item);

// One JSON object per line; parse_qa_dataset(serialize_qa_jsonl(x), jsonl) == x.
std::string serialize_qa_jsonl(const std::vector<QAPair>& pairs);

}  // namespace qarag::corpus
