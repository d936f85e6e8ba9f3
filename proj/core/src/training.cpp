// SPDX-License-Identifier: Apache-2.0
#include "w2vv/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "w2vv/errors.hpp"
#include "w2vv/parallel.hpp"
#include "w2vv/retrieval_eval.hpp"

namespace w2vv {

template <typename T>
LossResult<T> mse_loss(std::span<const T> r, std::span<const T> phi) {
  if (r.size() != phi.size() || r.empty())
    throw ShapeError("mse_loss on vectors of " + std::to_string(r.size()) + " and " +
                     std::to_string(phi.size()) + " components");
  const double d = double(r.size());
  LossResult<T> out;
  out.d_output.resize(r.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < r.size(); ++j) {
    const double diff = double(r[j]) - double(phi[j]);
    sum += diff * diff;
    out.d_output[j] = static_cast<T>(2.0 * diff / d);
  }
  out.loss = sum / d;
  return out;
}

template LossResult<float> mse_loss<float>(std::span<const float>, std::span<const float>);
template LossResult<double> mse_loss<double>(std::span<const double>, std::span<const double>);

template <typename T>
RmsProp<T>::RmsProp(const W2VVParams<T>& params, RmsPropConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(config.decay > 0.0 && config.decay < 1.0)) throw ConfigError("decay must be in (0,1)");
  if (!(config.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  params.for_each_tensor([&](const std::string&, const Tensor<T>& t) {
    acc_.emplace_back(t.rows(), t.cols(), 0.0);
  });
}

template <typename T>
void RmsProp<T>::update(W2VVParams<T>& params, const GradSet<T>& grads) {
  std::vector<Tensor<T>*> ps;
  std::vector<const Tensor<T>*> gs;
  std::vector<std::string> names;
  params.for_each_tensor([&](const std::string& n, Tensor<T>& t) {
    ps.push_back(&t);
    names.push_back(n);
  });
  grads.values.for_each_tensor([&](const std::string&, const Tensor<T>& t) { gs.push_back(&t); });
  if (ps.size() != acc_.size() || gs.size() != acc_.size())
    throw ShapeError("optimizer state does not match the parameters");

  const double lr = config_.learning_rate, gamma = config_.decay, eps = config_.epsilon;
  // Compute into scratch first so a numeric failure leaves state untouched.
  std::vector<std::vector<double>> new_acc(ps.size());
  std::vector<std::vector<T>> new_theta(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i]->same_shape(*gs[i]) || ps[i]->size() != acc_[i].size())
      throw ShapeError("gradient for '" + names[i] + "' has the wrong shape");
    const auto theta = ps[i]->flat();
    const auto g = gs[i]->flat();
    const auto acc = acc_[i].flat();
    new_acc[i].resize(theta.size());
    new_theta[i].resize(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = g[j];
      const double a = gamma * acc[j] + (1.0 - gamma) * gj * gj;
      const double t = double(theta[j]) - lr * gj / std::sqrt(a + eps);
      if (!std::isfinite(a) || !std::isfinite(t))
        throw NumericError("non-finite RMSprop update in '" + names[i] + "'");
      new_acc[i][j] = a;
      new_theta[i][j] = static_cast<T>(t);
    }
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::copy(new_acc[i].begin(), new_acc[i].end(), acc_[i].flat().begin());
    std::copy(new_theta[i].begin(), new_theta[i].end(), ps[i]->flat().begin());
  }
}

template class RmsProp<float>;
template class RmsProp<double>;

PlateauSchedule::PlateauSchedule(std::size_t lr_patience, std::size_t stop_patience)
    : lr_patience_(lr_patience),
      stop_patience_(stop_patience),
      best_(-std::numeric_limits<double>::infinity()) {
  if (lr_patience == 0 || stop_patience == 0) throw ConfigError("patience values must be positive");
}

PlateauSchedule::Decision PlateauSchedule::observe(double score) {
  Decision d;
  if (score > best_) {
    best_ = score;
    streak_ = 0;
    d.improved = true;
  } else {
    ++streak_;
    d.halve = streak_ % lr_patience_ == 0;
    d.stop = streak_ >= stop_patience_;
    if (d.halve) ++halvings_;
  }
  d.streak = streak_;
  return d;
}

std::vector<TrainingPair> build_pairs(const TextEncoder& encoder, const CaptionSet& captions,
                                      const FeatureStore& features) {
  std::vector<TrainingPair> pairs;
  pairs.reserve(captions.size());
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& rec : captions.records()) {
    const auto idx = features.find(rec.key.media_id);
    if (!idx) {
      if (++n_missing <= 10) missing += (missing.empty() ? "" : ", ") + rec.key.media_id;
      continue;
    }
    pairs.push_back({rec.key, encoder.encode(rec.text), features.at(*idx)});
  }
  if (n_missing)
    throw DatasetError(std::to_string(n_missing) + " caption(s) reference media without features: " +
                       missing + (n_missing > 10 ? ", ..." : ""));
  return pairs;
}

double batch_gradient(const W2VVParams<float>& params, std::span<const TrainingPair> pairs,
                      std::span<const std::size_t> batch, std::span<const std::uint64_t> seeds,
                      double dropout_rate, std::size_t threads, GradSet<float>& grads) {
  if (batch.empty()) throw ConfigError("empty mini-batch");
  if (seeds.size() != batch.size()) throw ConfigError("one dropout seed per example is required");
  const std::size_t chunks = std::max<std::size_t>(1, std::min(threads, batch.size()));

  auto run_chunk = [&](std::size_t c, GradSet<float>& g) {
    const std::size_t lo = batch.size() * c / chunks, hi = batch.size() * (c + 1) / chunks;
    double loss = 0.0;
    ForwardTrace<float> trace;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& pair = pairs[batch[i]];
      Rng rng(seeds[i]);
      const auto r = forward<float>(params, pair.inputs, Mode::kTrain, dropout_rate, &rng, &trace);
      const auto l = mse_loss<float>(r, pair.target);
      loss += l.loss;
      backward<float>(params, trace, l.d_output, g);
    }
    return loss;
  };

  grads.set_zero();
  double total = 0.0;
  if (chunks == 1) {
    total = run_chunk(0, grads);
  } else {
    std::vector<GradSet<float>> partial(chunks, GradSet<float>::zeros_like(params));
    std::vector<double> losses(chunks, 0.0);
    parallel_for(chunks, chunks, [&](std::size_t c) { losses[c] = run_chunk(c, partial[c]); });
    for (std::size_t c = 0; c < chunks; ++c) {
      grads.add(partial[c]);
      total += losses[c];
    }
  }
  grads.scale(1.0 / double(batch.size()));
  return total;
}

double run_epoch(W2VVParams<float>& params, std::span<const TrainingPair> pairs,
                 std::size_t batch_size, double dropout_rate, Rng& rng, RmsProp<float>& optimizer,
                 std::size_t threads) {
  if (pairs.empty()) throw DatasetError("no training pairs");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  auto grads = GradSet<float>::zeros_like(params);
  double total = 0.0;
  std::vector<std::uint64_t> seeds;
  for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
    const std::size_t hi = std::min(order.size(), lo + batch_size);
    std::span<const std::size_t> batch(order.data() + lo, hi - lo);
    seeds.resize(batch.size());
    for (auto& s : seeds) s = rng();
    total += batch_gradient(params, pairs, batch, seeds, dropout_rate, threads, grads);
    optimizer.update(params, grads);
  }
  return total / double(pairs.size());
}

double evaluate_mse(const W2VVParams<float>& params, std::span<const TrainingPair> pairs,
                    std::size_t threads) {
  if (pairs.empty()) throw DatasetError("no pairs to evaluate");
  std::vector<double> losses(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const auto r = forward<float>(params, pairs[i].inputs, Mode::kEval, 0.0, nullptr);
    losses[i] = mse_loss<float>(r, pairs[i].target).loss;
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) / double(pairs.size());
}

std::string format_epoch_log(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu\t%.9g\t%.9g\t%.9g\t%zu", r.epoch, r.train_loss, r.val_score,
                r.learning_rate, r.streak);
  return buf;
}

double recall_sum_score(const W2VVModel& model, const CaptionSet& captions,
                        const FeatureStore& features, std::size_t threads) {
  const auto pool = encode_pool(model, captions, threads);
  FeatureStore queries(features.dim());
  for (const auto& id : captions.media_ids()) queries.add(id, features.get(id));
  const auto relevance = build_relevance(pool.keys(), RelevanceConvention::kSharedMedia);
  const std::array<std::size_t, 3> ks{1, 5, 10};
  const auto report = evaluate_pool(queries, pool, relevance, ks, threads);
  double s = 0.0;
  for (const auto& [k, v] : report.recall) s += v;
  return s;
}

FitResult fit(const RunConfig& config, const CaptionSet& train_captions,
              const FeatureStore& train_features, const CaptionSet& val_captions,
              const FeatureStore& val_features, std::shared_ptr<const EmbeddingTable> embeddings,
              const ValidationFn& validator, const EpochCallback& on_epoch) {
  config.validate();
  if (train_captions.empty()) throw DatasetError("training caption set is empty");
  if (val_captions.empty()) throw DatasetError("validation caption set is empty");
  if (train_features.dim() != val_features.dim())
    throw DimensionMismatchError("training and validation features differ in dimensionality");
  if (config.vectorizers.mean_embedding && !embeddings)
    throw ConfigError("the mean-embedding branch needs a pretrained embedding file");

  const auto& v = config.vectorizers;
  Vocabulary vocab;
  if (v.bow || v.gru) vocab = build_vocabulary(train_captions, config.min_count);
  TextEncoder encoder(v, vocab, v.mean_embedding ? embeddings : nullptr, config.gru_hidden);

  const auto train_pairs = build_pairs(encoder, train_captions, train_features);
  const auto val_pairs = build_pairs(encoder, val_captions, val_features);

  const auto shape = config.model_shape(vocab.size(), embeddings ? embeddings->dim() : 0,
                                        train_features.dim());
  W2VVModel current{encoder, init_params(shape, vocab, embeddings.get(), config.seed)};

  RmsProp<float> optimizer(current.params,
                           {config.learning_rate, config.decay, config.epsilon});
  PlateauSchedule schedule(config.lr_patience, config.stop_patience);
  Rng rng(config.seed ^ 0x9E3779B97F4A7C15ull);

  FitResult result{current, -std::numeric_limits<double>::infinity(), 0, {}};
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = optimizer.learning_rate();
    rec.train_loss = run_epoch(current.params, train_pairs, config.batch_size, config.dropout, rng,
                               optimizer, config.threads);
    if (validator) {
      rec.val_score = validator(current, epoch);
    } else if (config.validation_metric == ValidationMetric::kRecallSum) {
      rec.val_score = recall_sum_score(current, val_captions, val_features, config.threads);
    } else {
      rec.val_score = -evaluate_mse(current.params, val_pairs, config.threads);
    }
    const auto decision = schedule.observe(rec.val_score);
    rec.streak = decision.streak;
    rec.improved = decision.improved;
    if (decision.improved) {
      result.model.params = current.params;
      result.best_score = rec.val_score;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, result);
    if (decision.stop) break;
    if (decision.halve) optimizer.set_learning_rate(optimizer.learning_rate() / 2.0);
  }
  return result;
}

GradSet<double> analytic_gradient(const W2VVParams<double>& params, const CaptionInputs& inputs,
                                  std::span<const double> target) {
  ForwardTrace<double> trace;
  const auto r = forward<double>(params, inputs, Mode::kEval, 0.0, nullptr, &trace);
  const auto l = mse_loss<double>(r, target);
  auto grads = GradSet<double>::zeros_like(params);
  backward<double>(params, trace, l.d_output, grads);
  return grads;
}

GradCheckReport compare_gradients(const W2VVParams<double>& params, const CaptionInputs& inputs,
                                  std::span<const double> target, const GradSet<double>& analytic,
                                  double eps, std::size_t max_coords_per_tensor,
                                  std::uint64_t seed) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be > 0");
  W2VVParams<double> probe = params;
  std::vector<std::pair<std::string, Tensor<double>*>> slots;
  probe.for_each_tensor([&](const std::string& n, Tensor<double>& t) { slots.emplace_back(n, &t); });
  std::vector<const Tensor<double>*> grads;
  analytic.values.for_each_tensor(
      [&](const std::string&, const Tensor<double>& t) { grads.push_back(&t); });
  if (grads.size() != slots.size()) throw ShapeError("analytic gradient does not match the model");

  auto loss = [&] {
    const auto r = forward<double>(probe, inputs, Mode::kEval, 0.0, nullptr);
    return mse_loss<double>(r, target).loss;
  };

  GradCheckReport report;
  Rng rng(seed);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& [name, tensor] = slots[i];
    if (!tensor->same_shape(*grads[i])) throw ShapeError("gradient shape mismatch for " + name);
    std::vector<std::size_t> coords(tensor->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    report.coordinates_total += coords.size();
    if (max_coords_per_tensor > 0 && coords.size() > max_coords_per_tensor) {
      std::vector<std::size_t> picked;
      std::sample(coords.begin(), coords.end(), std::back_inserter(picked), max_coords_per_tensor, rng);
      coords = std::move(picked);
    }
    for (auto c : coords) {
      double& x = tensor->flat()[c];
      const double saved = x;
      x = saved + eps;
      const double up = loss();
      x = saved - eps;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grads[i]->flat()[c];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.coordinates_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_tensor = name + "[" + std::to_string(c) + "]";
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const W2VVParams<double>& params, const CaptionInputs& inputs,
                           std::span<const double> target, double eps,
                           std::size_t max_coords_per_tensor, std::uint64_t seed) {
  const auto analytic = analytic_gradient(params, inputs, target);
  return compare_gradients(params, inputs, target, analytic, eps, max_coords_per_tensor, seed);
}

GradCheckCase make_gradcheck_case(std::uint64_t seed) {
  const Vocabulary vocab({{"a", 9}, {"dog", 7}, {"runs", 6}, {"cat", 5}, {"over", 5}, {"log", 5}});
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  EmbeddingTable table(4);
  for (const char* w : {"dog", "runs", "cat", "log"}) {
    std::vector<float> row(4);
    for (auto& v : row) v = static_cast<float>(unit(rng));
    table.add(w, row);
  }

  ModelShape shape;
  shape.vocab_size = vocab.size();
  shape.mean_embedding_dim = 4;
  shape.embedding_dim = 4;
  shape.gru_hidden = 4;
  shape.hidden_layers = {8};
  shape.output_dim = 3;

  GradCheckCase c;
  c.params = init_params(shape, vocab, &table, seed).cast<double>();
  std::uniform_real_distribution<double> bias(-0.2, 0.5);
  c.params.for_each_tensor([&](const std::string& name, Tensor<double>& t) {
    if (name.ends_with("bias"))
      for (auto& v : t.flat()) v = bias(rng);
  });

  const auto tokens = tokenize("dog runs");
  c.inputs.bow = encode_bow(tokens, vocab);
  c.inputs.mean_embedding = encode_mean_embedding(tokens, table);
  c.inputs.token_ids = token_ids(tokens, vocab);
  std::uniform_real_distribution<double> target(0.0, 1.0);
  c.target = {target(rng), target(rng), target(rng)};
  return c;
}

}  // namespace w2vv
