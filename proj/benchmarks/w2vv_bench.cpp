// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "w2vv/retrieval_eval.hpp"
#include "w2vv/training.hpp"

namespace w2vv {
namespace {

void BM_RankCaptions(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 2048;
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g(0, 1);
  std::vector<CaptionKey> keys;
  for (std::size_t i = 0; i < n; ++i)
    keys.push_back({"m" + std::to_string(i / 5), static_cast<std::uint32_t>(i % 5)});
  std::vector<float> rows(n * d), q(d);
  for (auto& v : rows) v = g(rng);
  for (auto& v : q) v = g(rng);
  const EncodedPool pool(keys, d, rows);
  for (auto _ : state) benchmark::DoNotOptimize(rank_captions("q", q, pool));
  state.SetItemsProcessed(state.iterations() * std::int64_t(n));
}
BENCHMARK(BM_RankCaptions)->Arg(1000)->Arg(5000);

// One GRU step at the reference sizes (e = 500, h = 1024).
void BM_GruStep(benchmark::State& state) {
  ModelShape s;
  s.vectorizers = {false, false, true};
  s.vocab_size = 1;
  s.embedding_dim = 500;
  s.gru_hidden = 1024;
  s.output_dim = 1;
  const auto p = init_params(s, Vocabulary({{"x", 1}}), nullptr, 1);
  const std::vector<float> x(500, 0.1f), h(1024, 0.2f);
  for (auto _ : state) benchmark::DoNotOptimize(gru_step<float>(*p.gru, x, h));
}
BENCHMARK(BM_GruStep);

// Full eval-mode prediction for a 10-token caption on the reference
// Flickr8k-sized model.
void BM_Forward(benchmark::State& state) {
  std::vector<std::pair<std::string, std::uint64_t>> words;
  for (int i = 0; i < 2535; ++i) words.emplace_back("w" + std::to_string(100000 + i), 5);
  const Vocabulary vocab(words);
  auto table = std::make_shared<EmbeddingTable>(500);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> row(500);
  for (int i = 0; i < 2535; i += 2) {
    for (auto& v : row) v = u(rng);
    table->add(words[i].first, row);
  }
  ModelShape s;
  s.vectorizers = {true, true, true};
  s.vocab_size = vocab.size();
  s.mean_embedding_dim = 500;
  s.embedding_dim = 500;
  s.gru_hidden = 1024;
  s.hidden_layers = {2048};
  s.output_dim = 2048;
  const W2VVModel model{TextEncoder(s.vectorizers, vocab, table, 1024),
                        init_params(s, vocab, table.get(), 3)};
  std::string caption;
  for (int i = 0; i < 10; ++i) caption += words[i * 37].first + " ";
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(caption));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace w2vv

BENCHMARK_MAIN();
