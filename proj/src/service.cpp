#include "qarag/service.hpp"

#include <charconv>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "qarag/errors.hpp"
#include "qarag/evalmetrics.hpp"
#include "qarag/text.hpp"

namespace qarag::service {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::chrono::seconds kProbeTimeout{2};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Reply json_reply(int status, const ordered_json& body) {
  return {status, body.dump(), "application/json"};
}

Reply error_reply(int status, std::string_view message) {
  ordered_json j;
  j["error"] = message;
  return json_reply(status, j);
}

template <typename F>
Reply guarded(F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    ordered_json j;
    j["error"] = e.what();
    if (e.byte_offset() >= 0) j["byte_offset"] = e.byte_offset();
    if (e.record() >= 0) j["record"] = e.record();
    return json_reply(400, j);
  } catch (const DuplicateIdError& e) {
    return error_reply(409, e.what());
  } catch (const NotFound& e) {
    return error_reply(404, e.what());
  } catch (const RetryableError& e) {
    return error_reply(503, e.what());
  } catch (const ConfigError& e) {
    return error_reply(400, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("bad request body: ") + e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

json parse_body(std::string_view body) {
  json j = json::parse(body);
  if (!j.is_object()) throw ConfigError("request body must be a JSON object");
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string decode_base64(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+' || c == '-') return 62;
    if (c == '/' || c == '_') return 63;
    return -1;
  };
  std::string out;
  out.reserve(in.size() * 3 / 4);
  std::uint32_t buf = 0;
  int bits = 0;
  bool padding = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (c == '=') {
      padding = true;
      continue;
    }
    if (c == '\n' || c == '\r' || c == ' ') continue;
    const int v = value(c);
    if (v < 0 || padding) {
      throw ParseError("invalid base64 at byte " + std::to_string(i), static_cast<std::int64_t>(i));
    }
    buf = (buf << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buf >> bits) & 0xFF));
    }
  }
  return out;
}

std::pair<std::string, int> split_bind(std::string_view bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("bind must be host:port, got \"" + std::string(bind) + "\"");
  int port = -1;
  const auto p = bind.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
  if (ec != std::errc{} || ptr != p.data() + p.size() || port < 0 || port > 65535) {
    throw ConfigError("bind port is invalid: \"" + std::string(p) + "\"");
  }
  return {std::string(bind.substr(0, colon)), port};
}

struct Service::Server {
  httplib::Server http;
  std::thread thread;
};

Service::Service(ServiceConfig cfg)
    : Service(cfg, embedding::make_embedder(cfg.embedder), ragpipe::make_generator(cfg.generator)) {}

Service::Service(ServiceConfig cfg, std::unique_ptr<embedding::Embedder> embedder,
                 std::unique_ptr<ragpipe::Generator> generator)
    : cfg_((cfg.validate(), std::move(cfg))),
      embedder_(std::move(embedder)),
      generator_(std::move(generator)),
      kb_(KnowledgeBase::open_or_create(cfg_.index_path, embedder_->dim(), cfg_.metric, cfg_.quantized)),
      transcript_(cfg_.transcript_path),
      server_(std::make_unique<Server>()) {
  templates_.emplace("default", load_template(cfg_));
  install_routes();
}

Service::~Service() { stop(); }

Reply Service::ingest(std::string_view body) {
  return guarded([&] {
    const json j = parse_body(body);
    IngestRequest req;
    req.kind = parse_ingest_kind(j.value("kind", std::string("qa")));
    req.format = j.value("format", std::string());
    req.source = j.value("source", std::string());
    if (j.contains("payload_base64")) {
      req.payload = decode_base64(j.at("payload_base64").get<std::string>());
    } else if (j.contains("path")) {
      req.payload = read_file(j.at("path").get<std::string>());
    } else {
      throw ConfigError("ingest needs payload_base64 or path");
    }
    std::lock_guard lock(ingest_mu_);
    auto prepared = prepare_ingest(req, cfg_.chunking, *embedder_);
    kb_.add_chunks(prepared.chunks, prepared.vectors);
    kb_.save(cfg_.index_path);
    ordered_json out;
    out["chunks_added"] = prepared.chunks.size();
    out["index_size"] = kb_.size();
    return json_reply(200, out);
  });
}

Reply Service::ask(std::string_view body) {
  return guarded([&] {
    const json j = parse_body(body);
    const auto question = j.at("question").get<std::string>();
    if (text::trim(question).empty()) return error_reply(422, "question is empty");
    std::size_t k = cfg_.k;
    if (j.contains("k")) {
      const auto kv = j.at("k").get<std::int64_t>();
      if (kv < 1) throw ConfigError("k must be >= 1");
      k = static_cast<std::size_t>(kv);
    }
    const auto template_id = j.value("template_id", std::string("default"));
    const auto it = templates_.find(template_id);
    if (it == templates_.end()) throw ConfigError("unknown template_id \"" + template_id + "\"");
    const ragpipe::PipelineDeps deps{kb_, *embedder_, it->second, *generator_, transcript_};
    const ChatTurn turn = ragpipe::answer_question(question, k, deps);
    return json_reply(turn.error ? 502 : 200, to_json(turn));
  });
}

Reply Service::transcripts(std::optional<std::string_view> since) {
  return guarded([&] {
    std::optional<Timestamp> from;
    if (since && !since->empty()) {
      try {
        from = parse_rfc3339(*since);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("since: ") + e.what());
      }
    }
    ordered_json out = ordered_json::array();
    for (const auto& turn : transcript_.export_all()) {
      if (from && turn.timestamp < *from) continue;
      out.push_back(to_json(turn));
    }
    return json_reply(200, out);
  });
}

Reply Service::evaluate(std::string_view body) {
  return guarded([&] {
    const json j = parse_body(body);
    std::vector<eval::EvalPair> pairs;
    if (j.contains("pairs")) {
      for (const auto& p : j.at("pairs")) {
        pairs.push_back({p.at("candidate").get<std::string>(), p.at("reference").get<std::string>()});
      }
    } else if (j.contains("references")) {
      std::unordered_map<std::string, std::string> answers;
      for (auto& turn : transcript_.export_all()) answers[turn.turn_id] = std::move(turn.answer);
      for (const auto& r : j.at("references")) {
        const auto id = r.at("turn_id").get<std::string>();
        const auto it = answers.find(id);
        if (it == answers.end()) throw NotFound("unknown turn_id \"" + id + "\"");
        pairs.push_back({it->second, r.at("reference").get<std::string>()});
      }
    } else {
      throw ConfigError("evaluate needs pairs or references");
    }
    if (pairs.empty()) throw ConfigError("evaluation set is empty");
    eval::EvalConfig ec;
    ec.bleu_mode = j.contains("mode") ? eval::parse_bleu_mode(j.at("mode").get<std::string>()) : cfg_.eval_mode;
    const auto report = eval::evaluate_corpus(pairs, *embedder_, ec);
    return Reply{200, eval::report_to_json(report), "application/json"};
  });
}

Reply Service::health() {
  auto embed_ok = std::async(std::launch::async, [&] { return embedder_->probe(kProbeTimeout); });
  auto gen_ok = std::async(std::launch::async, [&] { return generator_->probe(kProbeTimeout); });
  ordered_json j;
  j["status"] = "ok";
  j["index_size"] = kb_.size();
  j["embedder"] = embed_ok.get() ? "ok" : "down";
  j["generator"] = gen_ok.get() ? "ok" : "down";
  return json_reply(200, j);
}

void Service::install_routes() {
  auto& http = server_->http;
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  http.set_default_headers({
      {"Access-Control-Allow-Origin", cfg_.cors_origin},
      {"Access-Control-Allow-Headers", "Content-Type"},
      {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
  });
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.request_timeout).count();
  http.set_read_timeout(secs, 0);
  http.set_write_timeout(secs, 0);
  http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.Post("/v1/ingest", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, ingest(req.body));
  });
  http.Post("/v1/ask", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, ask(req.body));
  });
  http.Get("/v1/transcripts", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> since;
    if (req.has_param("since")) since = req.get_param_value("since");
    send(res, transcripts(since ? std::optional<std::string_view>(*since) : std::nullopt));
  });
  http.Post("/v1/evaluate", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, evaluate(req.body));
  });
  http.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  if (cfg_.ui_dir && !http.set_mount_point("/ui", cfg_.ui_dir->string())) {
    throw ConfigError("ui_dir does not exist: " + cfg_.ui_dir->string());
  }
}

void Service::serve() {
  const auto [host, port] = split_bind(cfg_.bind);
  if (!server_->http.listen(host, port)) throw std::runtime_error("cannot listen on " + cfg_.bind);
}

int Service::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->http.bind_to_any_port(host) : (server_->http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  server_->thread = std::thread([this] { server_->http.listen_after_bind(); });
  server_->http.wait_until_ready();
  return bound;
}

void Service::stop() {
  if (!server_) return;
  server_->http.stop();
  if (server_->thread.joinable()) server_->thread.join();
}

}  // namespace qarag::service
