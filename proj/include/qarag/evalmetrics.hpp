#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qarag/embedding.hpp"
#include "qarag/kernels.hpp"

namespace qarag::eval {

// The one tokenizer every metric uses: ASCII lowercase, Unicode-whitespace split, leading and
// trailing punctuation stripped per token, empty tokens dropped.
std::vector<std::string> tokenize(std::string_view text);

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source_text;

  static TokenSequence from_text(std::string_view text);
  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

// ---- BLEU -------------------------------------------------------------------------------

enum class BleuMode { corpus, sentence };

std::string_view to_string(BleuMode m) noexcept;
BleuMode parse_bleu_mode(std::string_view s);

// Clipped n-gram counts for one candidate against its references.
struct BleuStats {
  std::vector<std::size_t> matches;  // per order n = 1..max_n
  std::vector<std::size_t> totals;
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;  // closest reference length, ties to the shorter
};

struct BleuOptions {
  std::size_t max_n = 4;
  // Add-epsilon smoothing of zero numerators; off by default.
  bool smoothing = false;
  double epsilon = 0.1;
};

struct BleuReport {
  std::vector<double> precisions;  // P_1..P_max_n
  double bp = 0.0;
  double bleu = 0.0;
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  bool degenerate = false;  // empty candidate
};

// 1 when c >= r, exp(1 - r/c) when c < r (0 for c == 0).
double brevity_penalty(std::size_t cand_len, std::size_t ref_len) noexcept;

BleuStats bleu_stats(const TokenSequence& candidate, std::span<const TokenSequence> references,
                     std::size_t max_n = 4);
BleuReport bleu_from_stats(const BleuStats& stats, const BleuOptions& options = {});
// Sentence BLEU of one candidate.
BleuReport bleu(const TokenSequence& candidate, std::span<const TokenSequence> references,
                const BleuOptions& options = {});
// Pools numerators, denominators and lengths over all segments before the geometric mean.
BleuReport corpus_bleu(std::span<const BleuStats> segments, const BleuOptions& options = {});

// ---- ROUGE ------------------------------------------------------------------------------

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

RougeScore make_rouge_score(double precision, double recall) noexcept;

enum class RougeLVariant { recall_only, f_measure };

// Value reported for a ROUGE row: recall for recall_only, f1 for f_measure.
double headline(const RougeScore& s, RougeLVariant variant) noexcept;

RougeScore rouge_n(const TokenSequence& candidate, std::span<const TokenSequence> references,
                   std::size_t n);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// Sum of LCS over references divided by total reference length (recall) and by
// references x candidate length (precision).
RougeScore rouge_l(const TokenSequence& candidate, std::span<const TokenSequence> references);

// Summary-level LCS over newline-separated sentences of the source texts (union LCS).
RougeScore rouge_lsum(const TokenSequence& candidate, std::span<const TokenSequence> references);

// ---- METEOR -----------------------------------------------------------------------------

enum class MeteorMatcher { exact, exact_plus_stem };

struct MeteorReport {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double penalty = 0.0;
  double fmean = 0.0;
  double score = 0.0;
};

// Light suffix stripper used by the exact_plus_stem matcher.
std::string light_stem(std::string_view token);

// One-to-one unigram alignment, as (candidate index, reference index) pairs sorted by
// candidate index. Greedy left to right; each candidate token takes the reference position
// right after its predecessor's match when that position fits, else the first free match.
std::vector<std::pair<std::size_t, std::size_t>> meteor_align(
    std::span<const std::string> candidate, std::span<const std::string> reference,
    MeteorMatcher matcher = MeteorMatcher::exact);

MeteorReport meteor(const TokenSequence& candidate, const TokenSequence& reference,
                    MeteorMatcher matcher = MeteorMatcher::exact);

// ---- BERTScore --------------------------------------------------------------------------

struct BertScoreReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t skipped_tokens = 0;  // tokens whose embedding was the zero vector
};

// Greedy max-cosine matching of per-token embeddings. No IDF weighting, no rescaling.
BertScoreReport bertscore(const TokenSequence& candidate, const TokenSequence& reference,
                          const embedding::Embedder& embedder);

// ---- Corpus report ----------------------------------------------------------------------

inline constexpr std::array<std::string_view, 13> kReportRows = {
    "BLEU",       "Unigram Precision", "Bigram Precision", "Trigram Precision",
    "4-gram Precision", "ROUGE-1",      "ROUGE-2",          "ROUGE-L",
    "ROUGE-LSum", "METEOR",            "BERTScore-F1",     "BERTScore-Precision",
    "BERTScore-Recall"};

struct EvalPair {
  std::string candidate;
  std::string reference;
};

struct EvalConfig {
  BleuMode bleu_mode = BleuMode::corpus;
  bool bleu_smoothing = false;
  RougeLVariant rouge_variant = RougeLVariant::f_measure;
  MeteorMatcher meteor_matcher = MeteorMatcher::exact;
  kernels::Backend backend = kernels::Backend::openmp;
};

struct CorpusReport {
  std::vector<std::pair<std::string, double>> rows;  // kReportRows order
  std::size_t n_pairs = 0;
  BleuMode mode = BleuMode::corpus;

  double value(std::string_view row) const;
};

// BLEU rows pooled per the mode; ROUGE, METEOR and BERTScore macro-averaged over pairs.
// Throws ConfigError for an empty pair list.
CorpusReport evaluate_corpus(std::span<const EvalPair> pairs, const embedding::Embedder& embedder,
                             const EvalConfig& cfg = {});

// {"metrics": {row: value, ...}, "n_pairs": n, "mode": "corpus"}, two-space indented.
std::string report_to_json(const CorpusReport& report);
// "metric,value" header then one line per row in table order.
std::string report_to_csv(const CorpusReport& report);

// Reads {"candidate", "reference"} JSONL; other fields are ignored.
std::vector<EvalPair> parse_pairs_jsonl(std::string_view raw);

}  // namespace qarag::eval
