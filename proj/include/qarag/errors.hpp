#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qarag {

// Invalid configuration or shape/contract violations detected before any work is done.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input data. Carries the byte offset and record ordinal when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::int64_t byte_offset = -1, std::int64_t record = -1)
      : std::runtime_error(what), byte_offset_(byte_offset), record_(record) {}

  std::int64_t byte_offset() const noexcept { return byte_offset_; }
  std::int64_t record() const noexcept { return record_; }

 private:
  std::int64_t byte_offset_;
  std::int64_t record_;
};

// Absmax quantization of an all-zero vector; callers store such vectors raw.
class ZeroVectorError : public std::domain_error {
 public:
  ZeroVectorError() : std::domain_error("cannot quantize zero vector") {}
};

class DuplicateIdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupt persisted data (bad magic, truncated file, impossible constants).
class CorruptDataError : public std::runtime_error {
 public:
  CorruptDataError(const std::string& what, std::int64_t byte_offset = -1)
      : std::runtime_error(what), byte_offset_(byte_offset) {}

  std::int64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::int64_t byte_offset_;
};

// Transport or remote-side failure that may succeed if retried.
class RetryableError : public std::runtime_error {
 public:
  RetryableError(const std::string& what, std::string endpoint, int status)
      : std::runtime_error(what), endpoint_(std::move(endpoint)), status_(status) {}

  const std::string& endpoint() const noexcept { return endpoint_; }
  // HTTP status, or 0 when no response was received.
  int status() const noexcept { return status_; }

 private:
  std::string endpoint_;
  int status_;
};

}  // namespace qarag
