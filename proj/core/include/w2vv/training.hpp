// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "w2vv/data_io.hpp"
#include "w2vv/neural_net.hpp"
#include "w2vv/run_config.hpp"

namespace w2vv {

template <typename T>
struct LossResult {
  double loss = 0.0;       // mean over dimensions of (r - phi)^2
  std::vector<T> d_output;  // 2 (r - phi) / d
};

/// Throws ShapeError when the lengths differ.
template <typename T>
LossResult<T> mse_loss(std::span<const T> r, std::span<const T> phi);

struct RmsPropConfig {
  double learning_rate = 1e-4;
  double decay = 0.9;
  double epsilon = 1e-6;
};

/// acc <- decay * acc + (1 - decay) * g^2
/// theta <- theta - lr * g / sqrt(acc + epsilon)
template <typename T>
class RmsProp {
 public:
  RmsProp(const W2VVParams<T>& params, RmsPropConfig config);

  /// Throws NumericError (leaving params untouched) if any update is non-finite.
  void update(W2VVParams<T>& params, const GradSet<T>& grads);

  double learning_rate() const noexcept { return config_.learning_rate; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  const RmsPropConfig& config() const noexcept { return config_; }
  const std::vector<Tensor<double>>& accumulators() const noexcept { return acc_; }

 private:
  RmsPropConfig config_;
  std::vector<Tensor<double>> acc_;
};

/// Learning-rate halving and early stopping driven by validation scores
/// (higher is better). A single no-improvement streak feeds both rules:
/// the rate halves whenever the streak reaches a multiple of lr_patience,
/// training stops once it reaches stop_patience.
class PlateauSchedule {
 public:
  struct Decision {
    bool improved = false;
    bool halve = false;
    bool stop = false;
    std::size_t streak = 0;
  };

  PlateauSchedule(std::size_t lr_patience, std::size_t stop_patience);
  Decision observe(double score);

  double best() const noexcept { return best_; }
  std::size_t streak() const noexcept { return streak_; }
  std::size_t halvings() const noexcept { return halvings_; }

 private:
  std::size_t lr_patience_;
  std::size_t stop_patience_;
  double best_;
  std::size_t streak_ = 0;
  std::size_t halvings_ = 0;
};

/// One (caption, medium) example. `target` views the feature store.
struct TrainingPair {
  CaptionKey key;
  CaptionInputs inputs;
  std::span<const float> target;
};

/// Pairs every caption with its medium's feature. Throws DatasetError
/// listing unresolvable media ids.
std::vector<TrainingPair> build_pairs(const TextEncoder& encoder, const CaptionSet& captions,
                                      const FeatureStore& features);

/// Mean-loss gradient over `batch` (indices into `pairs`). Each example
/// draws its dropout mask from its own seed, so the result depends on
/// `threads` only through floating-point summation order. Returns the
/// summed per-pair loss.
double batch_gradient(const W2VVParams<float>& params, std::span<const TrainingPair> pairs,
                      std::span<const std::size_t> batch, std::span<const std::uint64_t> seeds,
                      double dropout_rate, std::size_t threads, GradSet<float>& grads);

/// Shuffles, splits into mini-batches, applies one RMSprop update per batch.
/// Returns the epoch-mean training loss (train mode).
double run_epoch(W2VVParams<float>& params, std::span<const TrainingPair> pairs,
                 std::size_t batch_size, double dropout_rate, Rng& rng, RmsProp<float>& optimizer,
                 std::size_t threads = 1);

/// Mean eval-mode MSE over the pairs.
double evaluate_mse(const W2VVParams<float>& params, std::span<const TrainingPair> pairs,
                    std::size_t threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_score = 0.0;
  double learning_rate = 0.0;  // rate used during the epoch
  std::size_t streak = 0;
  bool improved = false;
};

/// `epoch  train_loss  val_score  lr  streak`, tab-separated.
std::string format_epoch_log(const EpochRecord& record);

struct FitResult {
  W2VVModel model;  // parameters of the best validation epoch
  double best_score = 0.0;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
};

/// Replaces the built-in validation metric (for schedule tests).
using ValidationFn = std::function<double(const W2VVModel& model, std::size_t epoch)>;
using EpochCallback = std::function<void(const EpochRecord& record, const FitResult& best_so_far)>;

/// Trains from scratch: builds the vocabulary from the training captions,
/// initializes parameters, and runs epochs until the schedule stops or
/// max_epochs is reached. `embeddings` is required when the mean-embedding
/// branch is active; it also seeds the GRU lookup table.
FitResult fit(const RunConfig& config, const CaptionSet& train_captions,
              const FeatureStore& train_features, const CaptionSet& val_captions,
              const FeatureStore& val_features, std::shared_ptr<const EmbeddingTable> embeddings,
              const ValidationFn& validator = {}, const EpochCallback& on_epoch = {});

/// R@1 + R@5 + R@10 of ranking the split's captions for each of its media.
double recall_sum_score(const W2VVModel& model, const CaptionSet& captions,
                        const FeatureStore& features, std::size_t threads = 1);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_total = 0;
};

/// Central differences (L(theta + eps e) - L(theta - eps e)) / (2 eps) of the
/// eval-mode MSE against `analytic`; relative error |a - n| / max(|a|, |n|, 1e-8).
/// With max_coords_per_tensor > 0, larger tensors are sampled with `seed`.
GradCheckReport compare_gradients(const W2VVParams<double>& params, const CaptionInputs& inputs,
                                  std::span<const double> target, const GradSet<double>& analytic,
                                  double eps, std::size_t max_coords_per_tensor = 0,
                                  std::uint64_t seed = 0);

/// Backpropagated gradient of the eval-mode MSE for one pair.
GradSet<double> analytic_gradient(const W2VVParams<double>& params, const CaptionInputs& inputs,
                                  std::span<const double> target);

GradCheckReport grad_check(const W2VVParams<double>& params, const CaptionInputs& inputs,
                           std::span<const double> target, double eps,
                           std::size_t max_coords_per_tensor = 0, std::uint64_t seed = 0);

/// Seeded tiny model used by the gradient checker: bow + mean-embedding +
/// GRU (embedding 4, hidden 4), one 8-unit hidden layer, 3-dim output, and
/// a 2-token input. Biases are randomized so every tensor carries signal.
struct GradCheckCase {
  W2VVParams<double> params;
  CaptionInputs inputs;
  std::vector<double> target;
};
GradCheckCase make_gradcheck_case(std::uint64_t seed);

}  // namespace w2vv
