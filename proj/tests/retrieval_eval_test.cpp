// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "support/fixture.hpp"
#include "w2vv/errors.hpp"
#include "w2vv/retrieval_eval.hpp"
#include "w2vv/training.hpp"

namespace w2vv {
namespace {

TEST(Cosine, BasicCases) {
  const std::vector<float> a{1, 0}, b{0, 1}, z{0, 0}, c{3, 4};
  EXPECT_DOUBLE_EQ(cosine(c, c), 1.0);
  EXPECT_EQ(cosine(a, b), 0.0);
  EXPECT_EQ(cosine(z, a), 0.0);
  EXPECT_EQ(cosine(z, z), 0.0);
  const std::vector<float> three{1, 2, 3};
  EXPECT_THROW(cosine(a, three), ShapeError);
}

EncodedPool random_pool(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t per = 5) {
  std::normal_distribution<float> g(0, 1);
  std::vector<CaptionKey> keys;
  std::vector<float> rows(n * d);
  for (std::size_t i = 0; i < n; ++i)
    keys.push_back({"m" + std::to_string(i / per), static_cast<std::uint32_t>(i % per)});
  std::shuffle(keys.begin(), keys.end(), rng);
  for (auto& v : rows) v = g(rng);
  return EncodedPool(keys, d, rows);
}

// Independent oracle: pairwise cosines in long double, then sort by
// (similarity desc, key asc).
std::vector<CaptionKey> brute_force(std::span<const float> q, const EncodedPool& pool) {
  std::vector<std::pair<double, CaptionKey>> sims;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    long double dot = 0, nq = 0, nr = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      dot += (long double)q[j] * pool.row(i)[j];
      nq += (long double)q[j] * q[j];
      nr += (long double)pool.row(i)[j] * pool.row(i)[j];
    }
    const double s = (nq == 0 || nr == 0) ? 0.0 : double(dot / std::sqrt(nq * nr));
    sims.emplace_back(s, pool.keys()[i]);
  }
  std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<CaptionKey> out;
  for (const auto& s : sims) out.push_back(s.second);
  return out;
}

TEST(RankCaptions, AgreesWithBruteForceOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> n(1, 100), d(1, 32);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pool = random_pool(rng, n(rng), d(rng));
    std::vector<float> q(pool.dim());
    std::normal_distribution<float> g(0, 1);
    for (auto& v : q) v = g(rng);
    const auto ranked = rank_captions("q", q, pool);
    ASSERT_EQ(ranked.keys, brute_force(q, pool)) << trial;
    ASSERT_TRUE(std::is_sorted(ranked.similarities.rbegin(), ranked.similarities.rend()));
  }
}

TEST(RankCaptions, SelfMatchRanksFirst) {
  std::mt19937_64 rng(1);
  const auto pool = random_pool(rng, 10, 8);
  const auto r = rank_captions("q", pool.row(6), pool);
  EXPECT_EQ(r.keys[0], pool.keys()[6]);
  EXPECT_NEAR(r.similarities[0], 1.0, 1e-12);
}

TEST(RankCaptions, IdenticalRowsFallBackToKeyOrder) {
  std::vector<CaptionKey> keys{{"b", 1}, {"a", 2}, {"b", 0}, {"a", 10}, {"a", 3}};
  std::vector<float> rows(keys.size() * 2, 1.0f);
  const EncodedPool pool(keys, 2, rows);
  const std::vector<float> q{0.3f, 0.9f};
  auto sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(rank_captions("q", q, pool).keys, sorted);
  EXPECT_EQ(sorted.front(), (CaptionKey{"a", 2}));  // numeric, not lexical, index order
}

TEST(RankCaptions, PositiveScalingPreservesOrder) {
  std::mt19937_64 rng(2);
  const auto pool = random_pool(rng, 60, 12);
  std::vector<float> q(12);
  std::normal_distribution<float> g(0, 1);
  for (auto& v : q) v = g(rng);
  const auto base = rank_captions("q", q, pool).keys;
  for (float s : {1e-3f, 0.5f, 7.0f, 1e4f}) {
    auto qs = q;
    for (auto& v : qs) v *= s;
    EXPECT_EQ(rank_captions("q", qs, pool).keys, base) << s;
  }
}

TEST(RankCaptions, DimensionMismatch) {
  std::mt19937_64 rng(3);
  const auto pool = random_pool(rng, 5, 4);
  const std::vector<float> q{1, 2};
  EXPECT_THROW(rank_captions("q", q, pool), DimensionMismatchError);
}

TEST(Metrics, RecallAndMirFromRanks) {
  const std::vector<std::size_t> ranks{1, 3, 7, 12}, ks{1, 5, 10};
  const auto r = recall_from_ranks(ranks, ks);
  EXPECT_DOUBLE_EQ(r[0].second, 25.0);
  EXPECT_DOUBLE_EQ(r[1].second, 50.0);
  EXPECT_DOUBLE_EQ(r[2].second, 75.0);

  const std::vector<std::size_t> ones{1, 1, 1}, eleven{11};
  for (const auto& [k, v] : recall_from_ranks(ones, ks)) EXPECT_EQ(v, 100.0);
  for (const auto& [k, v] : recall_from_ranks(eleven, ks)) EXPECT_EQ(v, 0.0);

  const std::vector<std::size_t> mixed{1, 2, 4}, ten{10};
  EXPECT_NEAR(mir_from_ranks(mixed), 0.5833333333333334, 1e-15);
  EXPECT_EQ(mir_from_ranks(ones), 1.0);
  EXPECT_DOUBLE_EQ(mir_from_ranks(ten), 0.1);
}

TEST(Metrics, RecallIsMonotoneInK) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> rank(1, 40);
  std::vector<std::size_t> ks(40);
  std::iota(ks.begin(), ks.end(), std::size_t{1});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> ranks(1 + trial % 17);
    for (auto& x : ranks) x = rank(rng);
    const auto r = recall_from_ranks(ranks, ks);
    for (std::size_t i = 1; i < r.size(); ++i) ASSERT_LE(r[i - 1].second, r[i].second);
    const double mir = mir_from_ranks(ranks);
    EXPECT_EQ(mir == 1.0, std::all_of(ranks.begin(), ranks.end(), [](auto x) { return x == 1; }));
  }
}

TEST(Metrics, BestRankUsesHighestRelevantCaption) {
  RankedList r{"m1", {{"m0", 0}, {"m1", 3}, {"m2", 0}, {"m1", 0}}, {0.9, 0.8, 0.7, 0.6}};
  const std::vector<CaptionKey> keys{{"m0", 0}, {"m1", 3}, {"m2", 0}, {"m1", 0}};
  const auto rel = build_relevance(keys, RelevanceConvention::kSharedMedia);
  EXPECT_EQ(best_relevant_rank(r, rel), 2u);
  EXPECT_THROW(build_relevance(keys, RelevanceConvention::kSingleAnnotated), ProtocolError);
  RankedList missing{"m9", r.keys, r.similarities};
  try {
    const std::vector<RankedList> lists{missing};
    best_ranks(lists, rel);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("m9"), std::string::npos);
  }
}

TEST(Metrics, ReportJsonHasFixedKeys) {
  MetricsReport m{{{1, 25.0}, {5, 50.0}, {10, 75.0}}, 0.5, 4};
  const auto j = m.to_json();
  EXPECT_LT(j.find("\"r1\""), j.find("\"r5\""));
  EXPECT_LT(j.find("\"r10\""), j.find("\"mir\""));
  EXPECT_NE(j.find("\"queries\":4"), std::string::npos);
  EXPECT_EQ(m.recall_at(5), 50.0);
}

TEST(RankAll, ThreadCountDoesNotChangeResults) {
  std::mt19937_64 rng(12);
  const auto pool = random_pool(rng, 300, 16);
  FeatureStore q(16);
  std::normal_distribution<float> g(0, 1);
  std::vector<float> v(16);
  for (int i = 0; i < 60; ++i) {
    for (auto& x : v) x = g(rng);
    q.add("m" + std::to_string(i), v);
  }
  const auto a = rank_all(q, pool, 1), b = rank_all(q, pool, 8);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].keys, b[i].keys);
    EXPECT_EQ(a[i].similarities, b[i].similarities);
  }
  const auto rel = build_relevance(pool.keys(), RelevanceConvention::kSharedMedia);
  const std::array<std::size_t, 3> ks{1, 5, 10};
  EXPECT_EQ(evaluate(a, rel).to_json(), evaluate_pool(q, pool, rel, ks, 8).to_json());
  EXPECT_EQ(format_ranking_dump(a), format_ranking_dump(b));
}

TEST(RankingDump, FormatAndParse) {
  RankedList r{"img.jpg", {{"img.jpg", 1}, {"x#y", 0}}, {0.5, -0.25}};
  const std::vector<RankedList> lists{r};
  const auto text = format_ranking_dump(lists);
  EXPECT_EQ(text, "img.jpg\timg.jpg#1:0.500000 x#y#0:-0.250000\n");
  const auto back = parse_ranking_dump(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].keys, r.keys);
  EXPECT_EQ(back[0].similarities, r.similarities);
  EXPECT_EQ(format_ranking_dump(lists, 1), "img.jpg\timg.jpg#1:0.500000\n");
}

TEST(PoolStore, RoundTripThroughFeatureStore) {
  std::mt19937_64 rng(5);
  const auto pool = random_pool(rng, 12, 3);
  EXPECT_EQ(EncodedPool::from_feature_store(pool.to_feature_store()), pool);
}

W2VVModel bow_model(std::uint64_t seed) {
  const Vocabulary vocab({{"bicycle", 3}, {"dog", 2}, {"motorbike", 2}, {"street", 1}});
  ModelShape shape;
  shape.vectorizers = {true, false, false};
  shape.vocab_size = vocab.size();
  shape.hidden_layers = {8};
  shape.output_dim = 6;
  return {TextEncoder(shape.vectorizers, vocab, nullptr, 0),
          init_params(shape, vocab, nullptr, seed)};
}

TEST(ComposeQuery, IdentityAndCancellation) {
  const auto model = bow_model(4);
  const std::vector<float> img{0.5f, 1, 0, 2, 0.25f, 3};
  EXPECT_EQ(compose_query(img, {}, {}, model), img);
  const std::vector<std::string> w{"dog"};
  EXPECT_EQ(compose_query(img, w, w, model), img);
}

TEST(ComposeQuery, MatchesPredictionArithmetic) {
  const auto model = bow_model(4);
  const std::vector<float> img{0.5f, 1, 0, 2, 0.25f, 3};
  const std::vector<std::string> add{"motorbike"}, sub{"bicycle"};
  const auto out = compose_query(img, add, sub, model);
  const auto ra = model.predict("motorbike"), rs = model.predict("bicycle");
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out[i], img[i] - rs[i] + ra[i], 1e-6);
}

TEST(Nearest, TieBreakById) {
  FeatureStore s(2);
  s.add("b", std::vector<float>{1, 0});
  s.add("a", std::vector<float>{2, 0});
  s.add("c", std::vector<float>{0, 1});
  const std::vector<float> q{1, 0};
  const auto n = nearest(q, s, 2);
  ASSERT_EQ(n.size(), 2u);
  EXPECT_EQ(n[0].id, "a");
  EXPECT_EQ(n[1].id, "b");
}

TEST(ClusterSeparation, IdenticalEncodingsGiveZeroDistances) {
  std::vector<CaptionKey> keys{{"a", 0}, {"a", 1}, {"b", 0}, {"b", 1}};
  const EncodedPool pool(keys, 2, std::vector<float>(8, 1.0f));
  const auto cs = cluster_separation(pool);
  EXPECT_NEAR(cs.intra_mean, 0.0, 1e-12);
  EXPECT_NEAR(cs.inter_mean, 0.0, 1e-12);
  EXPECT_EQ(cs.intra_pairs, 2u);
  EXPECT_EQ(cs.inter_pairs, 4u);
  EXPECT_EQ(cs.intra[0], 2u);
  EXPECT_FALSE(cs.inter_sampled);
}

TEST(ClusterSeparation, OrthogonalGroups) {
  std::vector<CaptionKey> keys{{"a", 0}, {"a", 1}, {"b", 0}, {"b", 1}, {"b", 2}};
  const EncodedPool pool(keys, 2, {1, 0, 2, 0, 0, 1, 0, 3, 0, 0.5f});
  const auto cs = cluster_separation(pool);
  EXPECT_NEAR(cs.intra_mean, 0.0, 1e-12);
  EXPECT_NEAR(cs.inter_mean, 1.0, 1e-12);
  EXPECT_EQ(cs.inter[32], 6u);  // distance 1.0 falls in bin 32 of 64 over [0,2]
}

TEST(ClusterSeparation, DegenerateGroupingRejected) {
  std::vector<CaptionKey> one_group{{"a", 0}, {"a", 1}};
  EXPECT_THROW(cluster_separation(EncodedPool(one_group, 1, {1, 2})), ProtocolError);
  std::vector<CaptionKey> singletons{{"a", 0}, {"b", 0}};
  EXPECT_THROW(cluster_separation(EncodedPool(singletons, 1, {1, 2})), ProtocolError);
}

TEST(ClusterSeparation, SampledInterPairsAreCounted) {
  std::mt19937_64 rng(6);
  const auto pool = random_pool(rng, 50, 4);
  const auto cs = cluster_separation(pool, 100, 1);
  EXPECT_TRUE(cs.inter_sampled);
  EXPECT_EQ(cs.inter_pairs, 100u);
  EXPECT_EQ(std::accumulate(cs.inter.begin(), cs.inter.end(), std::uint64_t{0}), 100u);
  const auto again = cluster_separation(pool, 100, 1);
  EXPECT_EQ(again.inter, cs.inter);
}

TEST(ClusterSeparation, TrainedToyModelSeparatesMedia) {
  const auto fx = testing::make_fixture();
  auto emb = std::make_shared<EmbeddingTable>(fx.embeddings);
  RunConfig cfg;
  cfg.min_count = 1;
  cfg.embedding_dim = 16;
  cfg.gru_hidden = 16;
  cfg.hidden_layers = {64};
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 10;
  cfg.max_epochs = 40;
  cfg.validation_metric = ValidationMetric::kNegMse;
  const auto res = fit(cfg, fx.captions, fx.features, fx.captions, fx.features, emb);
  const auto cs = cluster_separation(encode_pool(res.model, fx.captions));
  EXPECT_LT(cs.intra_mean, cs.inter_mean);
}

TEST(EncodePool, DeterministicAndThreadIndependent) {
  const auto fx = testing::make_fixture();
  const auto model = bow_model(2);
  EXPECT_EQ(encode_pool(model, fx.captions, 1), encode_pool(model, fx.captions, 4));
  EXPECT_EQ(encode_pool(model, fx.captions).size(), fx.captions.size());
}

}  // namespace
}  // namespace w2vv
