// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "w2vv/neural_net.hpp"
#include "w2vv/text_pipeline.hpp"

namespace w2vv {

enum class ValidationMetric {
  kRecallSum,  // R@1 + R@5 + R@10 of caption retrieval on the validation split
  kNegMse,     // negative mean validation MSE
};

/// Training run configuration. Every field except the dataset paths has a
/// default; JSON keys match the field names.
struct RunConfig {
  VectorizerSet vectorizers;
  std::uint64_t min_count = 5;
  std::size_t embedding_dim = 500;
  std::size_t gru_hidden = 1024;
  std::vector<std::size_t> hidden_layers = {2048};
  bool linear_output = false;

  double learning_rate = 1e-4;
  double decay = 0.9;
  double epsilon = 1e-6;
  double dropout = 0.2;
  std::size_t batch_size = 100;
  std::size_t max_epochs = 100;
  std::size_t lr_patience = 3;
  std::size_t stop_patience = 10;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  ValidationMetric validation_metric = ValidationMetric::kRecallSum;

  std::string train_captions;
  std::string train_features;
  std::string val_captions;
  std::string val_features;
  std::string embeddings;
  std::string output_dir;

  /// Checks the numeric invariants; throws ConfigError.
  void validate() const;
  /// Additionally requires the dataset paths; throws ConfigError.
  void validate_paths() const;

  ModelShape model_shape(std::size_t vocab_size, std::size_t mean_embedding_dim,
                         std::size_t output_dim) const;
};

/// Unknown keys are rejected.
RunConfig parse_run_config(std::string_view json_text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON rendering (sorted keys, fixed formatting).
std::string run_config_to_json(const RunConfig& config);

std::string_view validation_metric_name(ValidationMetric m);

}  // namespace w2vv
