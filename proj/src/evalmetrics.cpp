#include "qarag/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "qarag/errors.hpp"
#include "qarag/text.hpp"

namespace qarag::eval {
namespace {

using GramCounts = std::unordered_map<std::string, std::size_t>;

GramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  GramCounts counts;
  if (n == 0 || tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::size_t gram_total(std::size_t len, std::size_t n) { return len >= n ? len - n + 1 : 0; }

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// DP table of LCS lengths; (a.size()+1) x (b.size()+1).
std::vector<std::vector<std::size_t>> lcs_table(std::span<const std::string> a,
                                                std::span<const std::string> b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t;
}

// Indices into `ref` of one LCS between ref and hyp.
std::vector<std::size_t> lcs_ref_indices(std::span<const std::string> ref,
                                         std::span<const std::string> hyp) {
  const auto t = lcs_table(ref, hyp);
  std::vector<std::size_t> idx;
  std::size_t i = ref.size(), j = hyp.size();
  while (i > 0 && j > 0) {
    if (ref[i - 1] == hyp[j - 1]) {
      idx.push_back(i - 1);
      --i;
      --j;
    } else if (t[i - 1][j] >= t[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(idx.begin(), idx.end());
  return idx;
}

std::vector<std::vector<std::string>> split_sentences(const TokenSequence& seq) {
  std::vector<std::vector<std::string>> out;
  if (seq.source_text.empty()) {
    if (!seq.tokens.empty()) out.push_back(seq.tokens);
    return out;
  }
  std::size_t start = 0;
  const std::string_view src = seq.source_text;
  while (start <= src.size()) {
    std::size_t nl = src.find('\n', start);
    if (nl == std::string_view::npos) nl = src.size();
    auto toks = tokenize(src.substr(start, nl - start));
    if (!toks.empty()) out.push_back(std::move(toks));
    start = nl + 1;
  }
  return out;
}

bool stem_eligible(std::string_view t, std::string_view suffix, std::size_t min_len) {
  return t.size() >= min_len && t.ends_with(suffix);
}

struct PairScores {
  BleuStats bleu;
  BleuReport sentence_bleu;
  RougeScore r1, r2, rl, rlsum;
  MeteorReport meteor;
  BertScoreReport bert;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> out;
  for (const auto& raw : text::split_whitespace(input)) {
    const auto stripped = text::strip_punct(raw);
    if (!stripped.empty()) out.push_back(text::ascii_lower(stripped));
  }
  return out;
}

TokenSequence TokenSequence::from_text(std::string_view input) {
  return {tokenize(input), std::string(input)};
}

std::string_view to_string(BleuMode m) noexcept { return m == BleuMode::corpus ? "corpus" : "sentence"; }

BleuMode parse_bleu_mode(std::string_view s) {
  if (s == "corpus") return BleuMode::corpus;
  if (s == "sentence") return BleuMode::sentence;
  throw ConfigError("unknown BLEU mode \"" + std::string(s) + "\" (expected corpus or sentence)");
}

double brevity_penalty(std::size_t cand_len, std::size_t ref_len) noexcept {
  if (cand_len == 0) return 0.0;
  if (cand_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

BleuStats bleu_stats(const TokenSequence& candidate, std::span<const TokenSequence> references,
                     std::size_t max_n) {
  if (references.empty()) throw ConfigError("BLEU needs at least one reference");
  if (max_n == 0) throw ConfigError("BLEU max_n must be >= 1");
  BleuStats stats;
  stats.cand_len = candidate.size();
  stats.matches.assign(max_n, 0);
  stats.totals.assign(max_n, 0);

  std::size_t best = references.front().size();
  for (const auto& ref : references) {
    const std::size_t len = ref.size();
    const auto diff = [&](std::size_t l) {
      return l > stats.cand_len ? l - stats.cand_len : stats.cand_len - l;
    };
    if (diff(len) < diff(best) || (diff(len) == diff(best) && len < best)) best = len;
  }
  stats.ref_len = best;

  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto cand_counts = count_ngrams(candidate.tokens, n);
    std::unordered_map<std::string, std::size_t> max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : count_ngrams(ref.tokens, n)) {
        auto& m = max_ref[gram];
        m = std::max(m, count);
      }
    }
    std::size_t clipped = 0;
    for (const auto& [gram, count] : cand_counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(count, it->second);
    }
    stats.matches[n - 1] = clipped;
    stats.totals[n - 1] = gram_total(candidate.size(), n);
  }
  return stats;
}

BleuReport bleu_from_stats(const BleuStats& stats, const BleuOptions& options) {
  BleuReport report;
  const std::size_t max_n = stats.matches.size();
  report.cand_len = stats.cand_len;
  report.ref_len = stats.ref_len;
  report.precisions.assign(max_n, 0.0);
  if (stats.cand_len == 0) {
    report.degenerate = true;
    return report;
  }
  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < max_n; ++n) {
    const double den = static_cast<double>(stats.totals[n]);
    double p = safe_div(static_cast<double>(stats.matches[n]), den);
    report.precisions[n] = p;
    if (p == 0.0 && options.smoothing && den > 0.0) p = options.epsilon / den;
    if (p == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(p) / static_cast<double>(max_n);
    }
  }
  report.bp = brevity_penalty(stats.cand_len, stats.ref_len);
  report.bleu = any_zero ? 0.0 : report.bp * std::exp(log_sum);
  return report;
}

BleuReport bleu(const TokenSequence& candidate, std::span<const TokenSequence> references,
                const BleuOptions& options) {
  return bleu_from_stats(bleu_stats(candidate, references, options.max_n), options);
}

BleuReport corpus_bleu(std::span<const BleuStats> segments, const BleuOptions& options) {
  BleuStats pooled;
  pooled.matches.assign(options.max_n, 0);
  pooled.totals.assign(options.max_n, 0);
  for (const auto& s : segments) {
    if (s.matches.size() != options.max_n) throw ConfigError("corpus_bleu: max_n mismatch");
    for (std::size_t n = 0; n < options.max_n; ++n) {
      pooled.matches[n] += s.matches[n];
      pooled.totals[n] += s.totals[n];
    }
    pooled.cand_len += s.cand_len;
    pooled.ref_len += s.ref_len;
  }
  return bleu_from_stats(pooled, options);
}

RougeScore make_rouge_score(double precision, double recall) noexcept {
  const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return {precision, recall, f1};
}

double headline(const RougeScore& s, RougeLVariant variant) noexcept {
  return variant == RougeLVariant::recall_only ? s.recall : s.f1;
}

RougeScore rouge_n(const TokenSequence& candidate, std::span<const TokenSequence> references,
                   std::size_t n) {
  if (n == 0) throw ConfigError("ROUGE-N needs n >= 1");
  const auto cand_counts = count_ngrams(candidate.tokens, n);
  const std::size_t cand_total = gram_total(candidate.size(), n);
  std::size_t matched = 0, ref_total = 0, cand_denominator = 0;
  for (const auto& ref : references) {
    const auto ref_counts = count_ngrams(ref.tokens, n);
    for (const auto& [gram, count] : ref_counts) {
      auto it = cand_counts.find(gram);
      if (it != cand_counts.end()) matched += std::min(count, it->second);
    }
    ref_total += gram_total(ref.size(), n);
    cand_denominator += cand_total;
  }
  if (ref_total == 0) return {};
  return make_rouge_score(safe_div(static_cast<double>(matched), static_cast<double>(cand_denominator)),
                          static_cast<double>(matched) / static_cast<double>(ref_total));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  // Two-row DP.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const TokenSequence& candidate, std::span<const TokenSequence> references) {
  std::size_t lcs_sum = 0, ref_len = 0, cand_len = 0;
  for (const auto& ref : references) {
    lcs_sum += lcs_length(candidate.tokens, ref.tokens);
    ref_len += ref.size();
    cand_len += candidate.size();
  }
  if (ref_len == 0 || cand_len == 0) return {};
  return make_rouge_score(static_cast<double>(lcs_sum) / static_cast<double>(cand_len),
                          static_cast<double>(lcs_sum) / static_cast<double>(ref_len));
}

RougeScore rouge_lsum(const TokenSequence& candidate, std::span<const TokenSequence> references) {
  const auto cand_sents = split_sentences(candidate);
  std::size_t cand_tokens = 0;
  for (const auto& s : cand_sents) cand_tokens += s.size();
  std::size_t hits = 0, ref_total = 0, cand_total = 0;
  for (const auto& ref : references) {
    const auto ref_sents = split_sentences(ref);
    std::map<std::string, std::size_t> ref_left, cand_left;
    std::size_t ref_tokens = 0;
    for (const auto& s : ref_sents) {
      for (const auto& t : s) ++ref_left[t];
      ref_tokens += s.size();
    }
    for (const auto& s : cand_sents) {
      for (const auto& t : s) ++cand_left[t];
    }
    for (const auto& r : ref_sents) {
      std::set<std::size_t> united;
      for (const auto& c : cand_sents) {
        for (std::size_t idx : lcs_ref_indices(r, c)) united.insert(idx);
      }
      for (std::size_t idx : united) {
        const auto& tok = r[idx];
        if (ref_left[tok] > 0 && cand_left[tok] > 0) {
          ++hits;
          --ref_left[tok];
          --cand_left[tok];
        }
      }
    }
    ref_total += ref_tokens;
    cand_total += cand_tokens;
  }
  if (ref_total == 0 || cand_total == 0) return {};
  return make_rouge_score(static_cast<double>(hits) / static_cast<double>(cand_total),
                          static_cast<double>(hits) / static_cast<double>(ref_total));
}

std::string light_stem(std::string_view token) {
  std::string t = text::ascii_lower(token);
  if (stem_eligible(t, "sses", 5)) return t.substr(0, t.size() - 2);
  if (stem_eligible(t, "ies", 5)) return t.substr(0, t.size() - 3) + "y";
  if (stem_eligible(t, "ing", 6)) return t.substr(0, t.size() - 3);
  if (stem_eligible(t, "ed", 5)) return t.substr(0, t.size() - 2);
  if (stem_eligible(t, "ly", 5)) return t.substr(0, t.size() - 2);
  if (stem_eligible(t, "es", 5)) return t.substr(0, t.size() - 2);
  if (stem_eligible(t, "s", 4) && !t.ends_with("ss")) return t.substr(0, t.size() - 1);
  return t;
}

std::vector<std::pair<std::size_t, std::size_t>> meteor_align(
    std::span<const std::string> candidate, std::span<const std::string> reference,
    MeteorMatcher matcher) {
  constexpr auto kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> cand_to_ref(candidate.size(), kNone);
  std::vector<bool> ref_used(reference.size(), false);

  auto stage = [&](const std::vector<std::string>& cand_keys, const std::vector<std::string>& ref_keys) {
    for (std::size_t i = 0; i < candidate.size(); ++i) {
      if (cand_to_ref[i] != kNone) continue;
      std::size_t pick = kNone;
      if (i > 0 && cand_to_ref[i - 1] != kNone) {
        const std::size_t next = cand_to_ref[i - 1] + 1;
        if (next < reference.size() && !ref_used[next] && ref_keys[next] == cand_keys[i]) pick = next;
      }
      for (std::size_t j = 0; pick == kNone && j < reference.size(); ++j) {
        if (!ref_used[j] && ref_keys[j] == cand_keys[i]) pick = j;
      }
      if (pick != kNone) {
        cand_to_ref[i] = pick;
        ref_used[pick] = true;
      }
    }
  };

  stage(std::vector<std::string>(candidate.begin(), candidate.end()),
        std::vector<std::string>(reference.begin(), reference.end()));
  if (matcher == MeteorMatcher::exact_plus_stem) {
    std::vector<std::string> cs, rs;
    for (const auto& t : candidate) cs.push_back(light_stem(t));
    for (const auto& t : reference) rs.push_back(light_stem(t));
    stage(cs, rs);
  }

  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (cand_to_ref[i] != kNone) out.emplace_back(i, cand_to_ref[i]);
  }
  return out;
}

MeteorReport meteor(const TokenSequence& candidate, const TokenSequence& reference,
                    MeteorMatcher matcher) {
  MeteorReport r;
  if (candidate.empty() || reference.empty()) return r;
  const auto alignment = meteor_align(candidate.tokens, reference.tokens, matcher);
  r.matches = alignment.size();
  if (r.matches == 0) return r;
  r.chunks = 1;
  for (std::size_t k = 1; k < alignment.size(); ++k) {
    const bool adjacent = alignment[k].first == alignment[k - 1].first + 1 &&
                          alignment[k].second == alignment[k - 1].second + 1;
    if (!adjacent) ++r.chunks;
  }
  const double m = static_cast<double>(r.matches);
  r.precision = m / static_cast<double>(candidate.size());
  r.recall = m / static_cast<double>(reference.size());
  r.penalty = 0.5 * std::pow(static_cast<double>(r.chunks) / m, 3.0);
  r.fmean = 10.0 * r.precision * r.recall / (r.recall + 9.0 * r.precision);
  r.score = r.fmean * (1.0 - r.penalty);
  return r;
}

BertScoreReport bertscore(const TokenSequence& candidate, const TokenSequence& reference,
                          const embedding::Embedder& embedder) {
  BertScoreReport report;
  if (candidate.empty() || reference.empty()) return report;

  std::vector<std::string> vocab;
  {
    std::set<std::string> uniq(candidate.tokens.begin(), candidate.tokens.end());
    uniq.insert(reference.tokens.begin(), reference.tokens.end());
    vocab.assign(uniq.begin(), uniq.end());
  }
  const auto vectors = embedder.embed_batch(vocab);
  std::unordered_map<std::string, const embedding::EmbeddingVector*> lookup;
  for (std::size_t i = 0; i < vocab.size(); ++i) lookup.emplace(vocab[i], &vectors[i]);

  auto usable = [&](const TokenSequence& seq) {
    std::vector<const embedding::EmbeddingVector*> out;
    for (const auto& t : seq.tokens) {
      const auto* v = lookup.at(t);
      if (v->is_zero()) {
        ++report.skipped_tokens;
      } else {
        out.push_back(v);
      }
    }
    return out;
  };
  const auto cand = usable(candidate);
  const auto ref = usable(reference);
  if (cand.empty() || ref.empty()) return report;

  std::vector<std::vector<double>> sim(cand.size(), std::vector<double>(ref.size()));
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      sim[i][j] = embedding::cosine_similarity(std::span<const float>(cand[i]->values),
                                               std::span<const float>(ref[j]->values));
    }
  }
  double p_sum = 0.0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    p_sum += *std::max_element(sim[i].begin(), sim[i].end());
  }
  double r_sum = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cand.size(); ++i) best = std::max(best, sim[i][j]);
    r_sum += best;
  }
  report.precision = p_sum / static_cast<double>(cand.size());
  report.recall = r_sum / static_cast<double>(ref.size());
  const double s = report.precision + report.recall;
  report.f1 = s > 0.0 ? 2.0 * report.precision * report.recall / s : 0.0;
  return report;
}

double CorpusReport::value(std::string_view row) const {
  for (const auto& [name, v] : rows) {
    if (name == row) return v;
  }
  throw ConfigError("no report row named \"" + std::string(row) + "\"");
}

CorpusReport evaluate_corpus(std::span<const EvalPair> pairs, const embedding::Embedder& embedder,
                             const EvalConfig& cfg) {
  if (pairs.empty()) throw ConfigError("evaluate_corpus needs at least one pair");
  const BleuOptions bleu_opts{4, cfg.bleu_smoothing, 0.1};

  std::vector<PairScores> scores(pairs.size());
  kernels::for_each_index(pairs.size(), cfg.backend, [&](std::size_t i) {
    const auto cand = TokenSequence::from_text(pairs[i].candidate);
    const std::array<TokenSequence, 1> refs{TokenSequence::from_text(pairs[i].reference)};
    auto& s = scores[i];
    s.bleu = bleu_stats(cand, refs, bleu_opts.max_n);
    s.sentence_bleu = bleu_from_stats(s.bleu, bleu_opts);
    s.r1 = rouge_n(cand, refs, 1);
    s.r2 = rouge_n(cand, refs, 2);
    s.rl = rouge_l(cand, refs);
    s.rlsum = rouge_lsum(cand, refs);
    s.meteor = meteor(cand, refs[0], cfg.meteor_matcher);
    s.bert = bertscore(cand, refs[0], embedder);
  });

  // Fixed-order reduction.
  const double n = static_cast<double>(pairs.size());
  std::array<double, 13> v{};
  if (cfg.bleu_mode == BleuMode::corpus) {
    std::vector<BleuStats> stats;
    stats.reserve(scores.size());
    for (const auto& s : scores) stats.push_back(s.bleu);
    const auto pooled = corpus_bleu(stats, bleu_opts);
    v[0] = pooled.bleu;
    for (std::size_t k = 0; k < 4; ++k) v[1 + k] = pooled.precisions[k];
  } else {
    for (const auto& s : scores) {
      v[0] += s.sentence_bleu.bleu;
      for (std::size_t k = 0; k < 4; ++k) v[1 + k] += s.sentence_bleu.precisions[k];
    }
    for (std::size_t k = 0; k < 5; ++k) v[k] /= n;
  }
  for (const auto& s : scores) {
    v[5] += headline(s.r1, cfg.rouge_variant);
    v[6] += headline(s.r2, cfg.rouge_variant);
    v[7] += headline(s.rl, cfg.rouge_variant);
    v[8] += headline(s.rlsum, cfg.rouge_variant);
    v[9] += s.meteor.score;
    v[10] += s.bert.f1;
    v[11] += s.bert.precision;
    v[12] += s.bert.recall;
  }
  for (std::size_t k = 5; k < 13; ++k) v[k] /= n;

  CorpusReport report;
  report.n_pairs = pairs.size();
  report.mode = cfg.bleu_mode;
  for (std::size_t k = 0; k < kReportRows.size(); ++k) {
    report.rows.emplace_back(std::string(kReportRows[k]), v[k]);
  }
  return report;
}

std::string report_to_json(const CorpusReport& report) {
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [name, value] : report.rows) metrics[name] = value;
  nlohmann::ordered_json doc;
  doc["metrics"] = std::move(metrics);
  doc["n_pairs"] = report.n_pairs;
  doc["mode"] = std::string(to_string(report.mode));
  return doc.dump(2) + "\n";
}

std::string report_to_csv(const CorpusReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "metric,value\n";
  for (const auto& [name, value] : report.rows) out << name << ',' << value << '\n';
  return out.str();
}

std::vector<EvalPair> parse_pairs_jsonl(std::string_view raw) {
  std::vector<EvalPair> out;
  std::size_t pos = 0;
  std::int64_t ordinal = 0;
  while (pos < raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    const auto line = raw.substr(pos, nl - pos);
    if (!text::trim(line).empty()) {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("pair " + std::to_string(ordinal) + " (byte offset " + std::to_string(pos) +
                             "): malformed JSON: " + e.what(),
                         static_cast<std::int64_t>(pos), ordinal);
      }
      auto get = [&](const char* key) {
        auto it = obj.is_object() ? obj.find(key) : obj.end();
        if (!obj.is_object() || it == obj.end() || !it->is_string()) {
          throw ParseError("pair " + std::to_string(ordinal) + " (byte offset " +
                               std::to_string(pos) + "): missing string field \"" + key + "\"",
                           static_cast<std::int64_t>(pos), ordinal);
        }
        return it->get<std::string>();
      };
      out.push_back({get("candidate"), get("reference")});
      ++ordinal;
    }
    pos = nl + 1;
  }
  return out;
}

}  // namespace qarag::eval
