#include "qarag/corpus.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "qarag/errors.hpp"
#include "qarag/text.hpp"

namespace qarag::corpus {
namespace {

using nlohmann::json;

std::string record_prefix(std::int64_t ordinal, std::size_t offset) {
  return "record " + std::to_string(ordinal) + " (byte offset " + std::to_string(offset) + "): ";
}

std::string required_string(const json& obj, const char* key, std::int64_t ordinal,
                            std::size_t offset) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(record_prefix(ordinal, offset) + "missing \"" + key + "\"",
                     static_cast<std::int64_t>(offset), ordinal);
  }
  if (!it->is_string()) {
    throw ParseError(record_prefix(ordinal, offset) + "\"" + key + "\" must be a string",
                     static_cast<std::int64_t>(offset), ordinal);
  }
  std::string value = it->get<std::string>();
  if (text::trim(value).empty()) {
    throw ParseError(record_prefix(ordinal, offset) + "\"" + key + "\" is empty",
                     static_cast<std::int64_t>(offset), ordinal);
  }
  return value;
}

QAPair qa_from_json(const json& obj, std::int64_t ordinal, std::size_t offset,
                    std::string_view source) {
  if (!obj.is_object()) {
    throw ParseError(record_prefix(ordinal, offset) + "expected a JSON object",
                     static_cast<std::int64_t>(offset), ordinal);
  }
  QAPair pair;
  pair.question = required_string(obj, "question", ordinal, offset);
  pair.answer = required_string(obj, "answer", ordinal, offset);
  if (auto it = obj.find("id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string() || it->get<std::string>().empty()) {
      throw ParseError(record_prefix(ordinal, offset) + "\"id\" must be a non-empty string",
                       static_cast<std::int64_t>(offset), ordinal);
    }
    pair.id = it->get<std::string>();
  } else {
    pair.id = std::string(source) + ":" + std::to_string(ordinal);
  }
  if (auto it = obj.find("course_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) {
      throw ParseError(record_prefix(ordinal, offset) + "\"course_id\" must be a string",
                       static_cast<std::int64_t>(offset), ordinal);
    }
    pair.course_id = it->get<std::string>();
  }
  if (auto it = obj.find("tags"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) {
      throw ParseError(record_prefix(ordinal, offset) + "\"tags\" must be an array",
                       static_cast<std::int64_t>(offset), ordinal);
    }
    for (const auto& tag : *it) {
      if (!tag.is_string()) {
        throw ParseError(record_prefix(ordinal, offset) + "\"tags\" entries must be strings",
                         static_cast<std::int64_t>(offset), ordinal);
      }
      pair.tags.push_back(tag.get<std::string>());
    }
  }
  return pair;
}

// Byte offsets of the top-level elements of an already-validated JSON array.
std::vector<std::size_t> array_element_offsets(std::string_view raw) {
  std::vector<std::size_t> offsets;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  bool expect_element = false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
    if (expect_element && depth == 1 && c != ']') {
      offsets.push_back(i);
      expect_element = false;
    }
    switch (c) {
      case '"':
        in_string = true;
        break;
      case '[':
      case '{':
        ++depth;
        if (depth == 1) expect_element = true;
        break;
      case ']':
      case '}':
        --depth;
        break;
      case ',':
        if (depth == 1) expect_element = true;
        break;
      default:
        break;
    }
  }
  return offsets;
}

json parse_json_checked(std::string_view raw, std::size_t base_offset, std::int64_t ordinal) {
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    const std::size_t at = base_offset + (e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = ordinal >= 0 ? record_prefix(ordinal, at) : std::string("byte offset ") +
                                                                      std::to_string(at) + ": ";
    throw ParseError(msg + "malformed JSON: " + e.what(), static_cast<std::int64_t>(at), ordinal);
  }
}

void check_utf8(std::string_view raw) {
  if (!text::is_valid_utf8(raw)) throw ParseError("input is not valid UTF-8", 0, -1);
}

std::string lower_trimmed(std::string_view s) { return text::ascii_lower(text::trim(s)); }

std::vector<std::string> dedup_languages(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& lang : raw) {
    std::string t(text::trim(lang));
    if (t.empty()) continue;
    if (seen.insert(t).second) out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    parts.emplace_back(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

constexpr std::array<const char*, 5> kCatalogFields = {
    "technical_direction", "course_name", "version", "course_type", "languages"};

CourseRecord make_course(const std::array<std::string, 5>& f,
                         const std::vector<std::string>& languages, std::int64_t ordinal,
                         std::size_t offset) {
  CourseRecord rec;
  rec.technical_direction = std::string(text::trim(f[0]));
  rec.course_name = std::string(text::trim(f[1]));
  rec.version = std::string(text::trim(f[2]));
  try {
    rec.course_type = parse_course_type(f[3]);
  } catch (const ParseError& e) {
    throw ParseError(record_prefix(ordinal, offset) + e.what(), static_cast<std::int64_t>(offset),
                     ordinal);
  }
  rec.languages = dedup_languages(languages);
  if (rec.course_name.empty()) {
    throw ParseError(record_prefix(ordinal, offset) + "course_name is empty",
                     static_cast<std::int64_t>(offset), ordinal);
  }
  return rec;
}

// RFC 4180 rows with the byte offset at which each row starts.
struct CsvRow {
  std::vector<std::string> fields;
  std::size_t offset = 0;
};

std::vector<CsvRow> parse_csv(std::string_view raw) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t i = 0;
  if (raw.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  row.offset = i;
  auto end_row = [&](std::size_t next) {
    row.fields.push_back(std::move(field));
    field.clear();
    bool blank = row.fields.size() == 1 && row.fields[0].empty() && !field_started;
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    row.offset = next;
    field_started = false;
  };
  for (; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < raw.size() && raw[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      row.fields.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
      end_row(i + 1);
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", static_cast<std::int64_t>(row.offset));
  if (field_started || !field.empty() || !row.fields.empty()) end_row(raw.size());
  return rows;
}

}  // namespace

std::string_view to_string(CourseType t) noexcept {
  switch (t) {
    case CourseType::Certification:
      return "Certification";
    case CourseType::Professional:
      return "Professional";
    case CourseType::General:
      return "General";
  }
  return "General";
}

CourseType parse_course_type(std::string_view s) {
  std::string v = lower_trimmed(s);
  constexpr std::string_view kSuffix = " course";
  if (v.size() > kSuffix.size() && v.ends_with(kSuffix)) v.resize(v.size() - kSuffix.size());
  if (v == "certification") return CourseType::Certification;
  if (v == "professional") return CourseType::Professional;
  if (v == "general") return CourseType::General;
  throw ParseError("unknown course_type \"" + std::string(s) +
                   "\"; accepted values: Certification, Professional, General");
}

void ChunkingConfig::validate() const {
  if (chunk_size == 0) throw ConfigError("chunk_size must be > 0");
  if (overlap >= chunk_size) throw ConfigError("overlap must be smaller than chunk_size");
}

std::vector<QAPair> parse_qa_dataset(std::string_view raw, QaFormat format,
                                     std::string_view source) {
  check_utf8(raw);
  std::vector<QAPair> out;
  std::vector<std::size_t> offsets;
  if (format == QaFormat::jsonl) {
    std::size_t pos = 0;
    std::int64_t ordinal = 0;
    while (pos < raw.size()) {
      std::size_t nl = raw.find('\n', pos);
      if (nl == std::string_view::npos) nl = raw.size();
      const std::string_view line = raw.substr(pos, nl - pos);
      if (!text::trim(line).empty()) {
        const json obj = parse_json_checked(line, pos, ordinal);
        out.push_back(qa_from_json(obj, ordinal, pos, source));
        offsets.push_back(pos);
        ++ordinal;
      }
      pos = nl + 1;
    }
  } else {
    if (text::trim(raw).empty()) return out;
    const json arr = parse_json_checked(raw, 0, -1);
    if (!arr.is_array()) throw ParseError("expected a top-level JSON array", 0, -1);
    offsets = array_element_offsets(raw);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.push_back(qa_from_json(arr[i], static_cast<std::int64_t>(i),
                                 i < offsets.size() ? offsets[i] : 0, source));
    }
  }
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!ids.insert(out[i].id).second) {
      throw DuplicateIdError("duplicate id \"" + out[i].id + "\" at record " + std::to_string(i));
    }
  }
  return out;
}

std::vector<CourseRecord> parse_catalog(std::string_view raw, CatalogFormat format) {
  check_utf8(raw);
  std::vector<CourseRecord> out;
  if (format == CatalogFormat::csv) {
    const auto rows = parse_csv(raw);
    if (rows.empty()) return out;
    std::array<int, 5> column{-1, -1, -1, -1, -1};
    const auto& header = rows.front().fields;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string name = lower_trimmed(header[c]);
      for (std::size_t f = 0; f < kCatalogFields.size(); ++f) {
        if (name == kCatalogFields[f]) column[f] = static_cast<int>(c);
      }
    }
    for (std::size_t f = 0; f < kCatalogFields.size(); ++f) {
      if (column[f] < 0) {
        throw ParseError(std::string("catalog header is missing column \"") + kCatalogFields[f] +
                             "\"",
                         0, -1);
      }
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const auto ordinal = static_cast<std::int64_t>(r - 1);
      if (row.fields.size() != header.size()) {
        throw ParseError(record_prefix(ordinal, row.offset) + "expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(row.fields.size()),
                         static_cast<std::int64_t>(row.offset), ordinal);
      }
      std::array<std::string, 5> f;
      for (std::size_t k = 0; k < 5; ++k) f[k] = row.fields[static_cast<std::size_t>(column[k])];
      out.push_back(make_course(f, split_commas(f[4]), ordinal, row.offset));
    }
    return out;
  }

  if (text::trim(raw).empty()) return out;
  const json arr = parse_json_checked(raw, 0, -1);
  if (!arr.is_array()) throw ParseError("expected a top-level JSON array", 0, -1);
  const auto offsets = array_element_offsets(raw);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto ordinal = static_cast<std::int64_t>(i);
    const std::size_t offset = i < offsets.size() ? offsets[i] : 0;
    const json& obj = arr[i];
    if (!obj.is_object()) {
      throw ParseError(record_prefix(ordinal, offset) + "expected a JSON object",
                       static_cast<std::int64_t>(offset), ordinal);
    }
    std::array<std::string, 5> f;
    std::vector<std::string> languages;
    std::array<bool, 5> present{};
    for (const auto& [key, value] : obj.items()) {
      const std::string name = lower_trimmed(key);
      for (std::size_t k = 0; k < 5; ++k) {
        if (name != kCatalogFields[k]) continue;
        present[k] = true;
        if (k == 4 && value.is_array()) {
          for (const auto& l : value) {
            if (!l.is_string()) {
              throw ParseError(record_prefix(ordinal, offset) + "languages must be strings",
                               static_cast<std::int64_t>(offset), ordinal);
            }
            languages.push_back(l.get<std::string>());
          }
        } else if (value.is_string()) {
          f[k] = value.get<std::string>();
          if (k == 4) languages = split_commas(f[k]);
        } else {
          throw ParseError(record_prefix(ordinal, offset) + "field \"" + key +
                               "\" must be a string",
                           static_cast<std::int64_t>(offset), ordinal);
        }
      }
    }
    for (std::size_t k = 0; k < 5; ++k) {
      if (!present[k]) {
        throw ParseError(record_prefix(ordinal, offset) + "missing \"" + kCatalogFields[k] + "\"",
                         static_cast<std::int64_t>(offset), ordinal);
      }
    }
    out.push_back(make_course(f, languages, ordinal, offset));
  }
  return out;
}

std::vector<DocumentChunk> chunk_text(std::string_view text, const ChunkingConfig& config,
                                      std::string_view source_id) {
  config.validate();
  const auto cps = text::decode_utf8(text);
  std::vector<std::size_t> cp_offsets;
  std::vector<bool> is_space;
  cp_offsets.reserve(cps.size() + 1);
  is_space.reserve(cps.size());
  for (const auto& cp : cps) {
    cp_offsets.push_back(cp.offset);
    is_space.push_back(text::is_unicode_space(cp.value));
  }
  cp_offsets.push_back(text.size());
  const std::size_t n = cp_offsets.size() - 1;

  std::vector<DocumentChunk> chunks;
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = std::min(start + config.chunk_size, n);
    if (config.boundary_mode == BoundaryMode::word_preserving && end < n && !is_space[end - 1] &&
        !is_space[end]) {
      for (std::size_t p = end - 1; p > start; --p) {
        if (is_space[p]) {
          end = p + 1;
          break;
        }
      }
    }
    DocumentChunk chunk;
    chunk.source_id = std::string(source_id);
    chunk.seq_no = chunks.size();
    chunk.id = chunk.source_id + "#" + std::to_string(chunk.seq_no);
    chunk.char_range = {start, end};
    chunk.text = std::string(text.substr(cp_offsets[start], cp_offsets[end] - cp_offsets[start]));
    chunks.push_back(std::move(chunk));
    if (end == n) break;
    start = std::max(end - std::min(config.overlap, end), start + 1);
  }
  return chunks;
}

std::string flatten_for_embedding(const QAPair& item) {
  return "Q: " + item.question + "\nA: " + item.answer;
}

std::string flatten_for_embedding(const CourseRecord& item) {
  std::string langs;
  for (std::size_t i = 0; i < item.languages.size(); ++i) {
    if (i) langs += ", ";
    langs += item.languages[i];
  }
  return item.course_name + " (" + item.version + ", " + std::string(to_string(item.course_type)) +
         "): direction " + item.technical_direction + "; languages: " + langs;
}

std::string serialize_qa_jsonl(const std::vector<QAPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json obj;
    obj["id"] = p.id;
    obj["question"] = p.question;
    obj["answer"] = p.answer;
    if (p.course_id) obj["course_id"] = *p.course_id;
    obj["tags"] = p.tags;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

}  // namespace qarag::corpus
