#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qarag/embedding.hpp"
#include "qarag/knowledge_base.hpp"
#include "qarag/transcript.hpp"

namespace qarag::ragpipe {

inline constexpr std::string_view kNoContextSentinel = "(no context retrieved)";
inline constexpr std::string_view kStubNoContextAnswer = "NO CONTEXT";
inline constexpr std::string_view kDefaultPreamble =
    "Answer the question using only the context below. If the context is insufficient, say so.";
inline constexpr std::string_view kDefaultTemplate =
    "Context:\n{context}\n\nQuestion: {question}\nAnswer:";
inline constexpr std::string_view kDefaultSeparator = "\n---\n";

// A template holding {context} and {question} exactly once each. The preamble, when
// non-empty, is prepended followed by a blank line.
class PromptTemplate {
 public:
  // Throws ConfigError when a placeholder is missing or repeated.
  explicit PromptTemplate(std::string body, std::string context_separator = std::string(kDefaultSeparator),
                          std::string instruction_preamble = "");

  static PromptTemplate default_template();

  const std::string& body() const noexcept { return body_; }
  const std::string& separator() const noexcept { return separator_; }
  const std::string& preamble() const noexcept { return preamble_; }

 private:
  std::string body_;
  std::string separator_;
  std::string preamble_;
};

// Single-pass substitution: text inside the question or contexts is never re-expanded.
std::string build_prompt(const PromptTemplate& t, const std::vector<std::string>& contexts,
                         std::string_view question);

struct GenerationParams {
  float temperature = 0.2f;
  float repetition_penalty = 1.1f;
  int max_new_tokens = 300;
  std::vector<std::string> stop_sequences;

  void validate() const;
};

enum class GeneratorKind { remote_http, deterministic_stub };

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::deterministic_stub;
  std::optional<std::string> endpoint;
  std::optional<std::string> model_name;
  GenerationParams params;
  std::chrono::milliseconds timeout{60000};

  void validate() const;
};

struct GenerationRequest {
  std::string prompt;
  std::vector<std::string> contexts;  // rank order; what the prompt was built from
};

class Generator {
 public:
  virtual ~Generator() = default;
  // Raw model output, before client-side truncation.
  virtual std::string complete(const GenerationRequest& request) const = 0;
  virtual bool probe(std::chrono::milliseconds timeout) const = 0;
  virtual std::string id() const = 0;
  virtual const GenerationParams& params() const noexcept = 0;
};

// First sentence of the first context, or "NO CONTEXT" when there is none.
class StubGenerator final : public Generator {
 public:
  explicit StubGenerator(GenerationParams params = {}) : params_(std::move(params)) {}
  std::string complete(const GenerationRequest& request) const override;
  bool probe(std::chrono::milliseconds) const override { return true; }
  std::string id() const override { return "stub"; }
  const GenerationParams& params() const noexcept override { return params_; }

 private:
  GenerationParams params_;
};

// POST {"model","prompt","temperature","repetition_penalty","max_tokens","stop"} -> {"text"}.
class RemoteGenerator final : public Generator {
 public:
  explicit RemoteGenerator(GeneratorConfig cfg);
  std::string complete(const GenerationRequest& request) const override;
  bool probe(std::chrono::milliseconds timeout) const override;
  std::string id() const override;
  const GenerationParams& params() const noexcept override { return cfg_.params; }

 private:
  GeneratorConfig cfg_;
};

std::unique_ptr<Generator> make_generator(const GeneratorConfig& cfg);

// The request body sent to a remote generator.
nlohmann::ordered_json generation_body(const GeneratorConfig& cfg, std::string_view prompt);

// complete() followed by truncation to max_new_tokens whitespace tokens.
std::string generate(const Generator& generator, const GenerationRequest& request);
std::string generate(const GeneratorConfig& cfg, std::string_view prompt);

struct PipelineDeps {
  const KnowledgeBase& index;
  const embedding::Embedder& embedder;
  const PromptTemplate& prompt_template;
  const Generator& generator;
  TranscriptStore& transcript;
};

// Embeds, retrieves, prompts, generates and appends the turn to the transcript.
// Embedder failures propagate with no turn recorded; generator failures are recorded on the
// turn (error set, empty answer) and the turn is still returned.
ChatTurn answer_question(std::string_view question, std::size_t k, const PipelineDeps& deps);

}  // namespace qarag::ragpipe
