#include "qarag/ragpipe.hpp"

#include <random>

#include "qarag/errors.hpp"
#include "qarag/http.hpp"
#include "qarag/text.hpp"

namespace qarag::ragpipe {
namespace {

constexpr std::string_view kContextSlot = "{context}";
constexpr std::string_view kQuestionSlot = "{question}";

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string new_turn_id() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  for (int word = 0; word < 2; ++word) {
    std::uint64_t v = rng();
    for (int i = 0; i < 16; ++i) {
      id.push_back(kHex[v & 0xF]);
      v >>= 4;
    }
  }
  return id;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string body, std::string context_separator,
                               std::string instruction_preamble)
    : body_(std::move(body)),
      separator_(std::move(context_separator)),
      preamble_(std::move(instruction_preamble)) {
  const auto contexts = count_occurrences(body_, kContextSlot);
  const auto questions = count_occurrences(body_, kQuestionSlot);
  if (contexts != 1 || questions != 1) {
    throw ConfigError("prompt template must contain {context} and {question} exactly once each "
                      "(found " + std::to_string(contexts) + " and " + std::to_string(questions) + ")");
  }
}

PromptTemplate PromptTemplate::default_template() {
  return PromptTemplate(std::string(kDefaultTemplate), std::string(kDefaultSeparator),
                        std::string(kDefaultPreamble));
}

std::string build_prompt(const PromptTemplate& t, const std::vector<std::string>& contexts,
                         std::string_view question) {
  if (text::trim(question).empty()) throw ConfigError("question is empty");
  std::string context;
  if (contexts.empty()) {
    context = kNoContextSentinel;
  } else {
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      if (i) context += t.separator();
      context += contexts[i];
    }
  }
  const std::string_view body = t.body();
  const std::size_t cpos = body.find(kContextSlot);
  const std::size_t qpos = body.find(kQuestionSlot);
  std::string out;
  if (!t.preamble().empty()) {
    out += t.preamble();
    out += "\n\n";
  }
  auto emit = [&](std::size_t from, std::size_t to) { out += body.substr(from, to - from); };
  if (cpos < qpos) {
    emit(0, cpos);
    out += context;
    emit(cpos + kContextSlot.size(), qpos);
    out += question;
    emit(qpos + kQuestionSlot.size(), body.size());
  } else {
    emit(0, qpos);
    out += question;
    emit(qpos + kQuestionSlot.size(), cpos);
    out += context;
    emit(cpos + kContextSlot.size(), body.size());
  }
  return out;
}

void GenerationParams::validate() const {
  if (!(temperature >= 0.0f)) throw ConfigError("temperature must be >= 0");
  if (!(repetition_penalty >= 1.0f)) throw ConfigError("repetition_penalty must be >= 1");
  if (max_new_tokens <= 0) throw ConfigError("max_new_tokens must be > 0");
}

void GeneratorConfig::validate() const {
  params.validate();
  if (kind == GeneratorKind::remote_http && (!endpoint || endpoint->empty())) {
    throw ConfigError("remote_http generator requires an endpoint");
  }
}

std::string StubGenerator::complete(const GenerationRequest& request) const {
  if (request.contexts.empty()) return std::string(kStubNoContextAnswer);
  return text::first_sentence(request.contexts.front());
}

RemoteGenerator::RemoteGenerator(GeneratorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  http::parse_url(*cfg_.endpoint);
}

nlohmann::ordered_json generation_body(const GeneratorConfig& cfg, std::string_view prompt) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model_name.value_or("");
  body["prompt"] = std::string(prompt);
  body["temperature"] = cfg.params.temperature;
  body["repetition_penalty"] = cfg.params.repetition_penalty;
  body["max_tokens"] = cfg.params.max_new_tokens;
  body["stop"] = cfg.params.stop_sequences;
  return body;
}

std::string RemoteGenerator::complete(const GenerationRequest& request) const {
  const auto response = http::post_json(*cfg_.endpoint, generation_body(cfg_, request.prompt), cfg_.timeout);
  const auto it = response.find("text");
  if (it == response.end() || !it->is_string()) {
    throw RetryableError("generator response has no \"text\" string", *cfg_.endpoint, 200);
  }
  return it->get<std::string>();
}

bool RemoteGenerator::probe(std::chrono::milliseconds timeout) const {
  return http::reachable(*cfg_.endpoint, timeout);
}

std::string RemoteGenerator::id() const {
  return "remote:" + cfg_.model_name.value_or("") + "@" + *cfg_.endpoint;
}

std::unique_ptr<Generator> make_generator(const GeneratorConfig& cfg) {
  cfg.validate();
  if (cfg.kind == GeneratorKind::remote_http) return std::make_unique<RemoteGenerator>(cfg);
  return std::make_unique<StubGenerator>(cfg.params);
}

std::string generate(const Generator& generator, const GenerationRequest& request) {
  if (request.prompt.empty()) throw ConfigError("prompt is empty");
  return text::truncate_tokens(generator.complete(request),
                               static_cast<std::size_t>(generator.params().max_new_tokens));
}

std::string generate(const GeneratorConfig& cfg, std::string_view prompt) {
  return generate(*make_generator(cfg), GenerationRequest{std::string(prompt), {}});
}

ChatTurn answer_question(std::string_view question, std::size_t k, const PipelineDeps& deps) {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (text::trim(question).empty()) throw ConfigError("question is empty");
  const auto started = std::chrono::steady_clock::now();

  ChatTurn turn;
  turn.turn_id = new_turn_id();
  turn.timestamp = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
  turn.question = std::string(question);
  turn.generator_id = deps.generator.id();

  const auto query = deps.embedder.embed(question);
  turn.retrieved = deps.index.search(query, k);

  GenerationRequest request;
  for (const auto& r : turn.retrieved) request.contexts.push_back(r.text);
  request.prompt = build_prompt(deps.prompt_template, request.contexts, question);
  turn.prompt = request.prompt;

  try {
    turn.answer = generate(deps.generator, request);
  } catch (const std::exception& e) {
    turn.answer.clear();
    turn.error = e.what();
  }
  turn.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  deps.transcript.append(turn);
  return turn;
}

}  // namespace qarag::ragpipe
