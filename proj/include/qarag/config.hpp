#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "qarag/corpus.hpp"
#include "qarag/embedding.hpp"
#include "qarag/evalmetrics.hpp"
#include "qarag/ragpipe.hpp"
#include "qarag/vectorstore.hpp"

namespace qarag {

struct ServiceConfig {
  std::string bind = "127.0.0.1:8080";
  std::filesystem::path index_path = "qarag.index";
  std::filesystem::path transcript_path = "transcript.jsonl";
  std::optional<std::filesystem::path> template_path;
  std::optional<std::filesystem::path> ui_dir;
  embedding::EmbeddingProviderConfig embedder;
  ragpipe::GeneratorConfig generator;
  corpus::ChunkingConfig chunking;
  vectorstore::Metric metric = vectorstore::Metric::cosine;
  bool quantized = false;
  eval::BleuMode eval_mode = eval::BleuMode::corpus;
  std::size_t k = 5;
  std::chrono::milliseconds request_timeout{60000};
  std::string cors_origin = "*";

  // Throws ConfigError: k >= 1, distinct paths, valid embedder/generator/chunking settings.
  void validate() const;
};

// Applies one "key = value" setting. Throws ConfigError for unknown keys or bad values.
// Keys: bind, index, transcript, template, ui_dir, embed_endpoint, embed_model, embed_dim, seed,
// gen_endpoint, gen_model, temperature, repetition_penalty, max_new_tokens, chunk_size,
// chunk_overlap, boundary_mode, metric, quantized, mode, k, request_timeout_ms, cors_origin.
void apply_setting(ServiceConfig& cfg, std::string_view key, std::string_view value);

// Plain "key = value" lines; '#' starts a comment line.
void apply_config_text(ServiceConfig& cfg, std::string_view text);

// QA_BIND, QA_INDEX_PATH, QA_TRANSCRIPT_PATH, QA_EMBED_ENDPOINT, QA_GEN_ENDPOINT.
void apply_env(ServiceConfig& cfg);

// Reads the template file: its whole content is the template body, no preamble.
ragpipe::PromptTemplate load_template(const ServiceConfig& cfg);

}  // namespace qarag
