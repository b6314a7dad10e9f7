#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "qarag/config.hpp"
#include "qarag/embedding.hpp"
#include "qarag/knowledge_base.hpp"
#include "qarag/ragpipe.hpp"
#include "qarag/transcript.hpp"

namespace qarag::service {

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

std::string decode_base64(std::string_view in);

// HTTP front end. Handlers are plain member functions so they can be driven without a socket.
//   POST /v1/ingest       {kind?, format, payload_base64 | path, source?} -> {chunks_added}
//   POST /v1/ask          {question, k?, template_id?} -> turn
//   GET  /v1/transcripts  ?since=<rfc3339> -> [turn, ...]
//   POST /v1/evaluate     {pairs:[{candidate,reference}]} | {references:[{turn_id,reference}]}
//   GET  /health
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  Service(ServiceConfig cfg, std::unique_ptr<embedding::Embedder> embedder,
          std::unique_ptr<ragpipe::Generator> generator);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Reply ingest(std::string_view body);
  Reply ask(std::string_view body);
  Reply transcripts(std::optional<std::string_view> since);
  Reply evaluate(std::string_view body);
  Reply health();

  // Blocks serving on cfg.bind until stop().
  void serve();
  // Serves on a background thread; port 0 picks a free port. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  const KnowledgeBase& knowledge_base() const noexcept { return kb_; }
  const ServiceConfig& config() const noexcept { return cfg_; }

 private:
  struct Server;

  void install_routes();

  ServiceConfig cfg_;
  std::unique_ptr<embedding::Embedder> embedder_;
  std::unique_ptr<ragpipe::Generator> generator_;
  KnowledgeBase kb_;
  TranscriptStore transcript_;
  std::map<std::string, ragpipe::PromptTemplate, std::less<>> templates_;
  std::mutex ingest_mu_;
  std::unique_ptr<Server> server_;
};

// Splits "host:port"; throws ConfigError on a missing or invalid port.
std::pair<std::string, int> split_bind(std::string_view bind);

}  // namespace qarag::service
