#pragma once

#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qarag/knowledge_base.hpp"

namespace qarag {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// "2026-10-15T08:30:00.123Z"
std::string format_rfc3339(Timestamp t);
// Accepts fractional seconds (any precision) and Z or +hh:mm offsets.
Timestamp parse_rfc3339(std::string_view s);

struct ChatTurn {
  std::string turn_id;
  Timestamp timestamp{};
  std::string question;
  std::vector<RetrievedChunk> retrieved;
  std::string prompt;
  std::string answer;
  std::string generator_id;
  std::int64_t latency_ms = 0;
  std::optional<std::string> error;  // set when generation failed; answer is then empty

  bool operator==(const ChatTurn&) const = default;
};

nlohmann::ordered_json to_json(const ChatTurn& turn);
ChatTurn chat_turn_from_json(const nlohmann::json& j);

// Append-only JSONL store. Each append is a single write(2) of one full line on an O_APPEND
// descriptor, so concurrent writers never interleave partial lines.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path path);

  // Retries once on I/O failure, then rethrows.
  void append(const ChatTurn& turn);
  std::vector<ChatTurn> export_all() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void write_line(const std::string& line);

  std::filesystem::path path_;
  mutable std::mutex mu_;
};

}  // namespace qarag
