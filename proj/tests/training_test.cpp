// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/fixture.hpp"
#include "w2vv/errors.hpp"
#include "w2vv/training.hpp"

namespace w2vv {
namespace {

TEST(MseLoss, ExactFitAndUnitOffset) {
  const std::vector<double> r{1, 2}, phi{1, 2};
  const auto same = mse_loss<double>(r, phi);
  EXPECT_EQ(same.loss, 0.0);
  EXPECT_EQ(same.d_output, (std::vector<double>{0, 0}));

  const std::vector<double> zero{0, 0}, one{1, 1};
  const auto off = mse_loss<double>(zero, one);
  EXPECT_DOUBLE_EQ(off.loss, 1.0);
  EXPECT_EQ(off.d_output, (std::vector<double>{-1, -1}));

  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(mse_loss<double>(three, one), ShapeError);
}

// One scalar parameter dressed up as a model: a 1x1 linear output layer.
W2VVParams<float> scalar_model(float theta) {
  W2VVParams<float> p;
  const std::pair<SegmentKind, std::size_t> seg{SegmentKind::kBow, 1};
  p.layout = SegmentLayout(std::span(&seg, 1));
  p.output_activation = OutputActivation::kLinear;
  p.mlp.layers.push_back({Tensor<float>(1, 1, theta), Tensor<float>(1, 1, 0.0f)});
  return p;
}

GradSet<float> scalar_grad(const W2VVParams<float>& p, float g) {
  auto grads = GradSet<float>::zeros_like(p);
  grads.values.mlp.layers[0].weight[0] = g;
  return grads;
}

TEST(RmsProp, FirstStepFromZero) {
  auto p = scalar_model(0.0f);
  RmsProp<float> opt(p, {});
  opt.update(p, scalar_grad(p, 1.0f));
  EXPECT_NEAR(p.mlp.layers[0].weight[0], -3.162261848898663e-4, 1e-9);
  EXPECT_NEAR(opt.accumulators()[0][0], 0.1, 1e-15);
}

TEST(RmsProp, ZeroGradientDecaysAccumulatorOnly) {
  auto p = scalar_model(0.5f);
  RmsProp<float> opt(p, {});
  opt.update(p, scalar_grad(p, 2.0f));
  const float theta = p.mlp.layers[0].weight[0];
  const double acc = opt.accumulators()[0][0];
  opt.update(p, scalar_grad(p, 0.0f));
  EXPECT_EQ(p.mlp.layers[0].weight[0], theta);
  EXPECT_DOUBLE_EQ(opt.accumulators()[0][0], 0.9 * acc);
}

TEST(RmsProp, ConstantGradientStepApproachesLearningRate) {
  auto p = scalar_model(0.0f);
  RmsProp<float> opt(p, {});
  const auto g = scalar_grad(p, 1.0f);
  float before = 0;
  for (int i = 0; i < 200; ++i) {
    before = p.mlp.layers[0].weight[0];
    opt.update(p, g);
  }
  const double step = double(before) - double(p.mlp.layers[0].weight[0]);
  EXPECT_NEAR(step, 1e-4, 0.05e-4);
}

TEST(RmsProp, NonFiniteGradientLeavesStateUntouched) {
  auto p = scalar_model(0.25f);
  RmsProp<float> opt(p, {});
  EXPECT_THROW(opt.update(p, scalar_grad(p, std::nanf(""))), NumericError);
  EXPECT_EQ(p.mlp.layers[0].weight[0], 0.25f);
  EXPECT_EQ(opt.accumulators()[0][0], 0.0);
}

TEST(RmsProp, RejectsBadHyperparameters) {
  const auto p = scalar_model(0.0f);
  EXPECT_THROW(RmsProp<float>(p, {0.0, 0.9, 1e-6}), ConfigError);
  EXPECT_THROW(RmsProp<float>(p, {1e-4, 1.0, 1e-6}), ConfigError);
  EXPECT_THROW(RmsProp<float>(p, {1e-4, 0.9, 0.0}), ConfigError);
}

TEST(PlateauSchedule, FlatScoresHalveEveryThirdEpochAndStopAfterTen) {
  PlateauSchedule s(3, 10);
  std::vector<std::size_t> halved;
  std::size_t stopped = 0;
  for (std::size_t epoch = 1; epoch <= 20 && !stopped; ++epoch) {
    const auto d = s.observe(1.0);
    if (d.halve) halved.push_back(epoch);
    if (d.stop) stopped = epoch;
  }
  EXPECT_EQ(halved, (std::vector<std::size_t>{4, 7, 10}));
  EXPECT_EQ(stopped, 11u);
}

TEST(PlateauSchedule, ImprovementResetsStreak) {
  PlateauSchedule s(3, 10);
  EXPECT_TRUE(s.observe(1.0).improved);
  EXPECT_FALSE(s.observe(1.0).halve);
  EXPECT_FALSE(s.observe(0.5).halve);
  EXPECT_TRUE(s.observe(2.0).improved);
  EXPECT_EQ(s.streak(), 0u);
  EXPECT_FALSE(s.observe(2.0).halve);
  EXPECT_FALSE(s.observe(2.0).halve);
  EXPECT_TRUE(s.observe(2.0).halve);
  EXPECT_EQ(s.halvings(), 1u);
}

struct Dataset {
  testing::SyntheticFixture fx = testing::make_fixture();
  std::shared_ptr<const EmbeddingTable> emb = std::make_shared<EmbeddingTable>(fx.embeddings);
};

RunConfig tiny_config() {
  RunConfig c;
  c.min_count = 1;
  c.embedding_dim = 16;
  c.gru_hidden = 8;
  c.hidden_layers = {32};
  c.batch_size = 10;
  c.max_epochs = 5;
  c.seed = 3;
  c.validation_metric = ValidationMetric::kNegMse;
  return c;
}

TEST(Fit, InjectedScoresDriveTheLearningRate) {
  Dataset d;
  auto cfg = tiny_config();
  cfg.max_epochs = 30;
  const auto res = fit(cfg, d.fx.captions, d.fx.features, d.fx.captions, d.fx.features, d.emb,
                       [](const W2VVModel&, std::size_t) { return 1.0; });
  ASSERT_EQ(res.history.size(), 11u);
  std::vector<double> lr;
  for (const auto& r : res.history) lr.push_back(r.learning_rate);
  const double b = 1e-4;
  EXPECT_EQ(lr, (std::vector<double>{b, b, b, b, b / 2, b / 2, b / 2, b / 4, b / 4, b / 4, b / 8}));
  EXPECT_EQ(res.best_epoch, 1u);
}

TEST(Fit, SingleEpochProducesOneRecord) {
  Dataset d;
  auto cfg = tiny_config();
  cfg.max_epochs = 1;
  const auto res = fit(cfg, d.fx.captions, d.fx.features, d.fx.captions, d.fx.features, d.emb);
  ASSERT_EQ(res.history.size(), 1u);
  EXPECT_EQ(res.best_epoch, 1u);
  EXPECT_TRUE(std::isfinite(res.history[0].train_loss));
}

TEST(Fit, TrainingLossDecreasesOverFirstEpochs) {
  Dataset d;
  auto cfg = tiny_config();
  cfg.learning_rate = 1e-3;
  cfg.dropout = 0.0;
  const auto res = fit(cfg, d.fx.captions, d.fx.features, d.fx.captions, d.fx.features, d.emb);
  ASSERT_EQ(res.history.size(), 5u);
  for (std::size_t i = 1; i < 5; ++i)
    EXPECT_LT(res.history[i].train_loss, res.history[i - 1].train_loss) << i;
}

TEST(Fit, MissingFeatureIsDatasetError) {
  Dataset d;
  CaptionSet extra = d.fx.captions;
  extra.add({"ghost.jpg", 0}, "nothing here");
  EXPECT_THROW(fit(tiny_config(), extra, d.fx.features, d.fx.captions, d.fx.features, d.emb),
               DatasetError);
}

TEST(RunEpoch, FullBatchAppliesExactlyOneUpdate) {
  Dataset d;
  const auto cfg = tiny_config();
  const auto vocab = build_vocabulary(d.fx.captions, 1);
  TextEncoder enc(cfg.vectorizers, vocab, d.emb, cfg.gru_hidden);
  const auto pairs = build_pairs(enc, d.fx.captions, d.fx.features);
  const auto shape = cfg.model_shape(vocab.size(), d.emb->dim(), d.fx.features.dim());
  auto a = init_params(shape, vocab, d.emb.get(), 1);
  auto b = a;

  RmsProp<float> opt_a(a, {}), opt_b(b, {});
  Rng rng(2);
  run_epoch(a, pairs, 1000, 0.0, rng, opt_a);

  std::vector<std::size_t> all(pairs.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const std::vector<std::uint64_t> seeds(all.size(), 0);
  auto g = GradSet<float>::zeros_like(b);
  batch_gradient(b, pairs, all, seeds, 0.0, 1, g);
  opt_b.update(b, g);

  std::vector<const Tensor<float>*> ta, tb;
  a.for_each_tensor([&](const std::string&, const Tensor<float>& t) { ta.push_back(&t); });
  b.for_each_tensor([&](const std::string&, const Tensor<float>& t) { tb.push_back(&t); });
  for (std::size_t k = 0; k < ta.size(); ++k)
    for (std::size_t i = 0; i < ta[k]->size(); ++i)
      ASSERT_NEAR((*ta[k])[i], (*tb[k])[i], 1e-6) << k << ":" << i;
}

// Gradient sums must not depend on how the batch is partitioned.
TEST(BatchGradient, ThreadPartitionInvariance) {
  Dataset d;
  const auto cfg = tiny_config();
  const auto vocab = build_vocabulary(d.fx.captions, 1);
  TextEncoder enc(cfg.vectorizers, vocab, d.emb, cfg.gru_hidden);
  const auto pairs = build_pairs(enc, d.fx.captions, d.fx.features);
  const auto shape = cfg.model_shape(vocab.size(), d.emb->dim(), d.fx.features.dim());
  const auto p = init_params(shape, vocab, d.emb.get(), 1);

  std::vector<std::size_t> batch(40);
  std::iota(batch.begin(), batch.end(), std::size_t{30});
  std::vector<std::uint64_t> seeds(batch.size());
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{100});

  auto g1 = GradSet<float>::zeros_like(p);
  const double l1 = batch_gradient(p, pairs, batch, seeds, 0.2, 1, g1);
  for (std::size_t threads : {2u, 3u, 8u}) {
    auto gn = GradSet<float>::zeros_like(p);
    const double ln = batch_gradient(p, pairs, batch, seeds, 0.2, threads, gn);
    EXPECT_NEAR(ln, l1, 1e-5 * std::abs(l1));
    std::vector<const Tensor<float>*> ta, tb;
    g1.values.for_each_tensor([&](const std::string&, const Tensor<float>& t) { ta.push_back(&t); });
    gn.values.for_each_tensor([&](const std::string&, const Tensor<float>& t) { tb.push_back(&t); });
    for (std::size_t k = 0; k < ta.size(); ++k)
      for (std::size_t i = 0; i < ta[k]->size(); ++i) {
        const double x = (*ta[k])[i], y = (*tb[k])[i];
        ASSERT_LE(std::abs(x - y), 1e-5 * std::max(std::abs(x), 1e-3)) << k << ":" << i;
      }
  }
}

TEST(Training, SmallStepsDoNotIncreaseLoss) {
  Dataset d;
  auto cfg = tiny_config();
  const auto vocab = build_vocabulary(d.fx.captions, 1);
  TextEncoder enc(cfg.vectorizers, vocab, d.emb, cfg.gru_hidden);
  const auto pairs = build_pairs(enc, d.fx.captions, d.fx.features);
  const auto shape = cfg.model_shape(vocab.size(), d.emb->dim(), d.fx.features.dim());
  auto p = init_params(shape, vocab, d.emb.get(), 1);
  RmsProp<float> opt(p, {1e-5, 0.9, 1e-6});
  std::vector<std::size_t> all(pairs.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const std::vector<std::uint64_t> seeds(all.size(), 0);
  auto g = GradSet<float>::zeros_like(p);
  double prev = evaluate_mse(p, pairs);
  for (int step = 0; step < 3; ++step) {
    batch_gradient(p, pairs, all, seeds, 0.0, 1, g);
    opt.update(p, g);
    const double now = evaluate_mse(p, pairs);
    EXPECT_LE(now, prev) << step;
    prev = now;
  }
}

TEST(GradCheck, SeededTinyModelPasses) {
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    const auto c = make_gradcheck_case(seed);
    const auto rep = grad_check(c.params, c.inputs, c.target, 1e-4);
    EXPECT_LT(rep.max_relative_error, 1e-4) << seed << " worst " << rep.worst_tensor;
    EXPECT_EQ(rep.coordinates_checked, rep.coordinates_total);
    EXPECT_EQ(rep.coordinates_total, c.params.parameter_count());
  }
}

TEST(GradCheck, DetectsCorruptedTensor) {
  const auto c = make_gradcheck_case(7);
  auto g = analytic_gradient(c.params, c.inputs, c.target);
  for (auto& v : g.values.gru->update_input.flat()) v *= 1.1;
  EXPECT_GT(compare_gradients(c.params, c.inputs, c.target, g, 1e-4).max_relative_error, 1e-2);
}

TEST(GradCheck, ZeroModelOnZeroInputReportsZero) {
  auto c = make_gradcheck_case(7);
  c.params.output_activation = OutputActivation::kLinear;
  c.params.for_each_tensor([](const std::string&, Tensor<double>& t) { t.set_zero(); });
  std::fill(c.inputs.bow.begin(), c.inputs.bow.end(), 0.0f);
  std::fill(c.inputs.mean_embedding.begin(), c.inputs.mean_embedding.end(), 0.0f);
  c.inputs.token_ids.clear();
  std::fill(c.target.begin(), c.target.end(), 0.0);
  const auto g = analytic_gradient(c.params, c.inputs, c.target);
  g.values.for_each_tensor([](const std::string& n, const Tensor<double>& t) {
    for (double v : t.flat()) ASSERT_EQ(v, 0.0) << n;
  });
  EXPECT_EQ(grad_check(c.params, c.inputs, c.target, 1e-4).max_relative_error, 0.0);
}

TEST(EpochLog, TabSeparatedColumns) {
  EpochRecord r{3, 0.25, 41.5, 5e-5, 2, false};
  EXPECT_EQ(format_epoch_log(r), "3\t0.25\t41.5\t5e-05\t2");
}

}  // namespace
}  // namespace w2vv
