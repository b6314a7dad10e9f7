#include "qarag/transcript.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>

#include "qarag/errors.hpp"

namespace qarag {

std::string format_rfc3339(Timestamp t) {
  const auto secs = std::chrono::floor<std::chrono::seconds>(t);
  const auto ms = (t - secs).count();
  const std::time_t tt = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

Timestamp parse_rfc3339(std::string_view s) {
  const std::string str(s);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, consumed = 0;
  if (std::sscanf(str.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec,
                  &consumed) != 6) {
    throw ParseError("invalid RFC 3339 timestamp \"" + str + "\"");
  }
  std::size_t pos = static_cast<std::size_t>(consumed);
  std::int64_t millis = 0;
  if (pos < str.size() && str[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < str.size() && std::isdigit(static_cast<unsigned char>(str[pos]))) {
      if (digits < 3) millis = millis * 10 + (str[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) throw ParseError("invalid RFC 3339 fraction in \"" + str + "\"");
    for (int k = digits; k < 3; ++k) millis *= 10;
  }
  std::int64_t offset_min = 0;
  if (pos < str.size() && (str[pos] == 'Z' || str[pos] == 'z')) {
    ++pos;
  } else if (pos < str.size() && (str[pos] == '+' || str[pos] == '-')) {
    int oh = 0, om = 0;
    if (std::sscanf(str.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2) {
      throw ParseError("invalid RFC 3339 offset in \"" + str + "\"");
    }
    offset_min = (str[pos] == '+' ? 1 : -1) * (oh * 60 + om);
    pos += 6;
  } else {
    throw ParseError("RFC 3339 timestamp needs a zone designator: \"" + str + "\"");
  }
  if (pos != str.size()) throw ParseError("trailing characters in timestamp \"" + str + "\"");
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) {
    throw ParseError("out-of-range RFC 3339 timestamp \"" + str + "\"");
  }
  return time_point_cast<milliseconds>(sys_days{ymd}) + hours{h} + minutes{mi} + seconds{sec} +
         milliseconds{millis} - minutes{offset_min};
}

nlohmann::ordered_json to_json(const ChatTurn& turn) {
  nlohmann::ordered_json j;
  j["turn_id"] = turn.turn_id;
  j["timestamp"] = format_rfc3339(turn.timestamp);
  j["question"] = turn.question;
  auto retrieved = nlohmann::ordered_json::array();
  for (const auto& r : turn.retrieved) {
    nlohmann::ordered_json item;
    item["chunk_id"] = r.chunk_id;
    item["score"] = r.score;
    item["rank"] = r.rank;
    item["text"] = r.text;
    retrieved.push_back(std::move(item));
  }
  j["retrieved"] = std::move(retrieved);
  j["prompt"] = turn.prompt;
  j["answer"] = turn.answer;
  j["generator_id"] = turn.generator_id;
  j["latency_ms"] = turn.latency_ms;
  j["error"] = turn.error ? nlohmann::ordered_json(*turn.error) : nlohmann::ordered_json(nullptr);
  return j;
}

ChatTurn chat_turn_from_json(const nlohmann::json& j) {
  ChatTurn t;
  t.turn_id = j.at("turn_id").get<std::string>();
  t.timestamp = parse_rfc3339(j.at("timestamp").get<std::string>());
  t.question = j.at("question").get<std::string>();
  for (const auto& r : j.at("retrieved")) {
    t.retrieved.push_back({r.at("chunk_id").get<std::string>(), r.at("score").get<float>(),
                           r.at("rank").get<std::size_t>(), r.at("text").get<std::string>()});
  }
  t.prompt = j.at("prompt").get<std::string>();
  t.answer = j.at("answer").get<std::string>();
  t.generator_id = j.at("generator_id").get<std::string>();
  t.latency_ms = j.at("latency_ms").get<std::int64_t>();
  if (auto it = j.find("error"); it != j.end() && !it->is_null()) t.error = it->get<std::string>();
  return t;
}

TranscriptStore::TranscriptStore(std::filesystem::path path) : path_(std::move(path)) {}

void TranscriptStore::write_line(const std::string& line) {
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw std::runtime_error("cannot open transcript " + path_.string() + ": " + std::strerror(errno));
  }
  const ssize_t n = ::write(fd, line.data(), line.size());
  const int write_errno = errno;
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size())) {
    throw std::runtime_error("short write to transcript " + path_.string() + ": " +
                             (n < 0 ? std::strerror(write_errno) : std::string("partial line")));
  }
}

void TranscriptStore::append(const ChatTurn& turn) {
  const std::string line = to_json(turn).dump() + "\n";
  std::lock_guard<std::mutex> lock(mu_);
  try {
    write_line(line);
  } catch (const std::runtime_error&) {
    write_line(line);
  }
}

std::vector<ChatTurn> TranscriptStore::export_all() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<ChatTurn> out;
  std::ifstream in(path_);
  if (!in) return out;
  std::string line;
  std::int64_t ordinal = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(chat_turn_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("transcript line " + std::to_string(ordinal) + ": " + e.what(), -1, ordinal);
    }
    ++ordinal;
  }
  return out;
}

}  // namespace qarag
