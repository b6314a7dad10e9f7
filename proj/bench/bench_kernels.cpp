// Serial reference vs OpenMP for the three data-parallel hot paths.
#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "qarag/embedding.hpp"
#include "qarag/evalmetrics.hpp"
#include "qarag/lowrank.hpp"
#include "qarag/vectorstore.hpp"

namespace {

using qarag::kernels::Backend;

qarag::embedding::EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> g;
  qarag::embedding::EmbeddingVector v;
  v.values.resize(dim);
  for (float& x : v.values) x = g(rng);
  qarag::embedding::l2_normalize(v.values);
  return v;
}

void BM_Search(benchmark::State& state, Backend backend, bool quantized) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t dim = 768;
  std::mt19937_64 rng(7);
  qarag::vectorstore::VectorIndex index(dim, qarag::vectorstore::Metric::cosine, quantized);
  for (std::size_t i = 0; i < n; ++i) index.add("c" + std::to_string(i), random_unit(rng, dim));
  const auto query = random_unit(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(index.search_topk(query, 5, backend));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Matmul(benchmark::State& state, Backend backend) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> da(n * n), db(n * n);
  for (float& x : da) x = u(rng);
  for (float& x : db) x = u(rng);
  const qarag::lowrank::DenseMatrix a(n, n, da), b(n, n, db);
  for (auto _ : state) benchmark::DoNotOptimize(qarag::lowrank::matmul(a, b, backend));
}

void BM_EvaluateCorpus(benchmark::State& state, Backend backend) {
  const auto n = static_cast<std::size_t>(state.range(0));
  static const char* kWords[] = {"the", "course", "covers", "routing", "switching", "exam",
                                 "days", "network", "security", "cloud", "lab", "hcia"};
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(kWords) - 1), len(8, 30);
  auto sentence = [&] {
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) s += std::string(kWords[pick(rng)]) + " ";
    return s;
  };
  std::vector<qarag::eval::EvalPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({sentence(), sentence()});
  const qarag::embedding::LocalHashEmbedder embedder(768, 0);
  qarag::eval::EvalConfig cfg;
  cfg.backend = backend;
  for (auto _ : state) benchmark::DoNotOptimize(qarag::eval::evaluate_corpus(pairs, embedder, cfg));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Search, serial, Backend::serial, false)->Arg(1000)->Arg(20000);
BENCHMARK_CAPTURE(BM_Search, openmp, Backend::openmp, false)->Arg(1000)->Arg(20000);
BENCHMARK_CAPTURE(BM_Search, serial_int8, Backend::serial, true)->Arg(20000);
BENCHMARK_CAPTURE(BM_Search, openmp_int8, Backend::openmp, true)->Arg(20000);
BENCHMARK_CAPTURE(BM_Matmul, serial, Backend::serial)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_Matmul, openmp, Backend::openmp)->Arg(64)->Arg(256);
BENCHMARK_CAPTURE(BM_EvaluateCorpus, serial, Backend::serial)->Arg(200);
BENCHMARK_CAPTURE(BM_EvaluateCorpus, openmp, Backend::openmp)->Arg(200);

BENCHMARK_MAIN();
