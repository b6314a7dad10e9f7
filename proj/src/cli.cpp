#include "qarag/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "qarag/config.hpp"
#include "qarag/errors.hpp"
#include "qarag/evalmetrics.hpp"
#include "qarag/knowledge_base.hpp"
#include "qarag/ragpipe.hpp"
#include "qarag/service.hpp"
#include "qarag/text.hpp"
#include "qarag/transcript.hpp"

namespace qarag::cli {
namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  std::optional<std::string> config;
  std::optional<std::string> index;
  std::optional<std::string> transcript;
  std::optional<std::string> template_path;
  std::optional<std::string> embed_endpoint;
  std::optional<std::string> gen_endpoint;
  std::optional<std::string> seed;
  std::optional<std::string> k;
  std::optional<std::string> mode;
  std::optional<std::string> bind;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// defaults < environment < config file < flags
ServiceConfig resolve_config(const GlobalFlags& f) {
  ServiceConfig cfg;
  apply_env(cfg);
  if (f.config) apply_config_text(cfg, read_file(*f.config));
  const std::pair<const std::optional<std::string>*, const char*> flags[] = {
      {&f.index, "index"},
      {&f.transcript, "transcript"},
      {&f.template_path, "template"},
      {&f.embed_endpoint, "embed_endpoint"},
      {&f.gen_endpoint, "gen_endpoint"},
      {&f.seed, "seed"},
      {&f.k, "k"},
      {&f.mode, "mode"},
      {&f.bind, "bind"},
  };
  for (const auto& [value, key] : flags) {
    if (*value) apply_setting(cfg, key, **value);
  }
  cfg.validate();
  return cfg;
}

void print_turn(const ChatTurn& turn, std::ostream& out) {
  out << turn.answer << "\n";
  if (!turn.retrieved.empty()) {
    out << "\nSources:\n";
    for (const auto& r : turn.retrieved) {
      out << "  " << r.rank << ". " << r.chunk_id << "  score=" << std::fixed << std::setprecision(4)
          << r.score << std::defaultfloat << "\n";
    }
  }
}

struct Session {
  explicit Session(const ServiceConfig& cfg)
      : embedder(embedding::make_embedder(cfg.embedder)),
        generator(ragpipe::make_generator(cfg.generator)),
        kb(KnowledgeBase::open_or_create(cfg.index_path, embedder->dim(), cfg.metric, cfg.quantized)),
        transcript(cfg.transcript_path),
        prompt_template(load_template(cfg)) {}

  ragpipe::PipelineDeps deps() { return {kb, *embedder, prompt_template, *generator, transcript}; }

  std::unique_ptr<embedding::Embedder> embedder;
  std::unique_ptr<ragpipe::Generator> generator;
  KnowledgeBase kb;
  TranscriptStore transcript;
  ragpipe::PromptTemplate prompt_template;
};

// Returns false when generation failed.
bool ask_once(Session& s, const std::string& question, std::size_t k, std::ostream& out,
              std::ostream& err) {
  const ChatTurn turn = ragpipe::answer_question(question, k, s.deps());
  if (turn.error) {
    err << "error: generation failed: " << *turn.error << "\n";
    return false;
  }
  print_turn(turn, out);
  return true;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Course Q&A retrieval pipeline: ingest, ask, chat, evaluate, serve", "qarag"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config, "key=value config file");
  app.add_option("--index", g.index, "Vector index path");
  app.add_option("--transcript", g.transcript, "Transcript JSONL path");
  app.add_option("--template", g.template_path, "Prompt template file");
  app.add_option("--embed-endpoint", g.embed_endpoint, "Remote embedding endpoint (http://...)");
  app.add_option("--gen-endpoint", g.gen_endpoint, "Remote generation endpoint (http://...)");
  app.add_option("--seed", g.seed, "Local embedder seed");
  app.add_option("--k", g.k, "Number of chunks to retrieve");
  app.add_option("--mode", g.mode, "BLEU mode: corpus or sentence");
  app.add_option("--bind", g.bind, "host:port for serve");

  auto* ingest = app.add_subcommand("ingest", "Parse, chunk, embed and index a data file");
  std::string ingest_file, ingest_kind = "qa", ingest_format, ingest_source;
  ingest->add_option("--file", ingest_file, "Input file")->required();
  ingest->add_option("--kind", ingest_kind, "qa, catalog or text");
  ingest->add_option("--format", ingest_format, "qa: jsonl|json_array, catalog: csv|json_array");
  ingest->add_option("--source", ingest_source, "Id prefix for generated ids");

  auto* info = app.add_subcommand("index-info", "Print index statistics");

  auto* ask = app.add_subcommand("ask", "Answer one question");
  std::string question;
  ask->add_option("--q", question, "Question")->required();

  auto* chat = app.add_subcommand("chat", "Read questions from stdin until EOF");

  auto* evalc = app.add_subcommand("eval", "Score candidate/reference pairs");
  std::string pairs_path, out_path, csv_path;
  evalc->add_option("--pairs", pairs_path, "JSONL with candidate and reference fields")->required();
  evalc->add_option("--out", out_path, "Write the JSON report here instead of stdout");
  evalc->add_option("--csv", csv_path, "Also write a CSV report");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    const ServiceConfig cfg = resolve_config(g);

    if (*ingest) {
      IngestRequest req;
      req.kind = parse_ingest_kind(ingest_kind);
      req.format = ingest_format;
      req.source = ingest_source;
      req.payload = read_file(ingest_file);
      auto embedder = embedding::make_embedder(cfg.embedder);
      auto kb = KnowledgeBase::open_or_create(cfg.index_path, embedder->dim(), cfg.metric, cfg.quantized);
      auto prepared = prepare_ingest(req, cfg.chunking, *embedder);
      kb.add_chunks(prepared.chunks, prepared.vectors);
      kb.save(cfg.index_path);
      out << "chunks_added: " << prepared.chunks.size() << "\nindex_size: " << kb.size() << "\n";
      return 0;
    }
    if (*info) {
      const auto kb = KnowledgeBase::load(cfg.index_path);
      out << "path: " << cfg.index_path.string() << "\n"
          << "size: " << kb.size() << "\n"
          << "dim: " << kb.dim() << "\n"
          << "metric: " << vectorstore::to_string(kb.metric()) << "\n"
          << "quantized: " << (kb.quantized() ? "true" : "false") << "\n";
      return 0;
    }
    if (*ask) {
      if (text::trim(question).empty()) throw UsageError("question is empty");
      Session s(cfg);
      return ask_once(s, question, cfg.k, out, err) ? 0 : kRuntime;
    }
    if (*chat) {
      Session s(cfg);
      std::string line;
      int status = 0;
      out << "> " << std::flush;
      while (std::getline(in, line)) {
        if (!text::trim(line).empty()) {
          if (!ask_once(s, line, cfg.k, out, err)) status = kRuntime;
        }
        out << "> " << std::flush;
      }
      out << "\n";
      return status;
    }
    if (*evalc) {
      const auto pairs = eval::parse_pairs_jsonl(read_file(pairs_path));
      auto embedder = embedding::make_embedder(cfg.embedder);
      eval::EvalConfig ec;
      ec.bleu_mode = cfg.eval_mode;
      const auto report = eval::evaluate_corpus(pairs, *embedder, ec);
      const std::string json = eval::report_to_json(report);
      if (out_path.empty()) {
        out << json;
      } else {
        write_file(out_path, json);
      }
      if (!csv_path.empty()) write_file(csv_path, eval::report_to_csv(report));
      return 0;
    }
    if (*serve) {
      service::Service svc(cfg);
      err << "serving on " << cfg.bind << " (index " << cfg.index_path.string() << ", "
          << svc.knowledge_base().size() << " chunks)\n";
      svc.serve();
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what();
    if (e.record() >= 0) err << " (record " << e.record() << ")";
    if (e.byte_offset() >= 0) err << " (byte " << e.byte_offset() << ")";
    err << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace qarag::cli
