#include "qarag/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qarag/errors.hpp"
#include "qarag/text.hpp"

namespace qarag {
namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("setting " + std::string(key) + ": not a number: \"" + std::string(value) + "\"");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = text::ascii_lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("setting " + std::string(key) + ": not a boolean: \"" + std::string(value) + "\"");
}

}  // namespace

void ServiceConfig::validate() const {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (index_path == transcript_path ||
      (template_path && (*template_path == index_path || *template_path == transcript_path))) {
    throw ConfigError("index, transcript and template paths must be distinct");
  }
  embedder.validate();
  generator.validate();
  chunking.validate();
}

void apply_setting(ServiceConfig& cfg, std::string_view key, std::string_view raw_value) {
  const std::string value(text::trim(raw_value));
  if (key == "bind") {
    cfg.bind = value;
  } else if (key == "index") {
    cfg.index_path = value;
  } else if (key == "transcript") {
    cfg.transcript_path = value;
  } else if (key == "template") {
    cfg.template_path = value;
  } else if (key == "ui_dir") {
    cfg.ui_dir = value;
  } else if (key == "embed_endpoint") {
    if (value.empty()) {
      cfg.embedder.kind = embedding::EmbedderKind::deterministic_local;
      cfg.embedder.endpoint.reset();
    } else {
      cfg.embedder.kind = embedding::EmbedderKind::remote_http;
      cfg.embedder.endpoint = value;
    }
  } else if (key == "embed_model") {
    cfg.embedder.model_name = value;
  } else if (key == "embed_dim") {
    cfg.embedder.dim = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    cfg.embedder.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "gen_endpoint") {
    if (value.empty()) {
      cfg.generator.kind = ragpipe::GeneratorKind::deterministic_stub;
      cfg.generator.endpoint.reset();
    } else {
      cfg.generator.kind = ragpipe::GeneratorKind::remote_http;
      cfg.generator.endpoint = value;
    }
  } else if (key == "gen_model") {
    cfg.generator.model_name = value;
  } else if (key == "temperature") {
    cfg.generator.params.temperature = parse_number<float>(key, value);
  } else if (key == "repetition_penalty") {
    cfg.generator.params.repetition_penalty = parse_number<float>(key, value);
  } else if (key == "max_new_tokens") {
    cfg.generator.params.max_new_tokens = parse_number<int>(key, value);
  } else if (key == "chunk_size") {
    cfg.chunking.chunk_size = parse_number<std::size_t>(key, value);
  } else if (key == "chunk_overlap") {
    cfg.chunking.overlap = parse_number<std::size_t>(key, value);
  } else if (key == "boundary_mode") {
    if (value == "hard") {
      cfg.chunking.boundary_mode = corpus::BoundaryMode::hard;
    } else if (value == "word_preserving") {
      cfg.chunking.boundary_mode = corpus::BoundaryMode::word_preserving;
    } else {
      throw ConfigError("boundary_mode must be hard or word_preserving");
    }
  } else if (key == "metric") {
    cfg.metric = vectorstore::parse_metric(value);
  } else if (key == "quantized") {
    cfg.quantized = parse_bool(key, value);
  } else if (key == "mode") {
    cfg.eval_mode = eval::parse_bleu_mode(value);
  } else if (key == "k") {
    cfg.k = parse_number<std::size_t>(key, value);
  } else if (key == "request_timeout_ms") {
    cfg.request_timeout = std::chrono::milliseconds(parse_number<long long>(key, value));
    cfg.generator.timeout = cfg.request_timeout;
  } else if (key == "cors_origin") {
    cfg.cors_origin = value;
  } else {
    throw ConfigError("unknown setting \"" + std::string(key) + "\"");
  }
}

void apply_config_text(ServiceConfig& cfg, std::string_view content) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    ++line_no;
    const auto line = text::trim(content.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(cfg, text::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_env(ServiceConfig& cfg) {
  static constexpr std::pair<const char*, const char*> kEnv[] = {
      {"QA_BIND", "bind"},
      {"QA_INDEX_PATH", "index"},
      {"QA_TRANSCRIPT_PATH", "transcript"},
      {"QA_EMBED_ENDPOINT", "embed_endpoint"},
      {"QA_GEN_ENDPOINT", "gen_endpoint"},
  };
  for (const auto& [var, key] : kEnv) {
    if (const char* v = std::getenv(var); v != nullptr && *v != '\0') apply_setting(cfg, key, v);
  }
}

ragpipe::PromptTemplate load_template(const ServiceConfig& cfg) {
  if (!cfg.template_path) return ragpipe::PromptTemplate::default_template();
  std::ifstream in(*cfg.template_path);
  if (!in) throw ConfigError("cannot read template file " + cfg.template_path->string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ragpipe::PromptTemplate(ss.str());
}

}  // namespace qarag
