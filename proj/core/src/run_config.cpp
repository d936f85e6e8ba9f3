// SPDX-License-Identifier: Apache-2.0
#include "w2vv/run_config.hpp"

#include <json.hpp>

#include "w2vv/data_io.hpp"
#include "w2vv/errors.hpp"

namespace w2vv {

using nlohmann::json;

std::string_view validation_metric_name(ValidationMetric m) {
  return m == ValidationMetric::kRecallSum ? "recall_sum" : "neg_mse";
}

void RunConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("decay must be in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0,1)");
  if (!vectorizers.any()) throw ConfigError("at least one vectorizer must be selected");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (lr_patience == 0 || stop_patience == 0) throw ConfigError("patience values must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
  if ((vectorizers.gru || vectorizers.mean_embedding) && embedding_dim == 0)
    throw ConfigError("embedding_dim must be positive");
  if (vectorizers.gru && gru_hidden == 0) throw ConfigError("gru_hidden must be positive");
  for (auto h : hidden_layers)
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
}

void RunConfig::validate_paths() const {
  validate();
  auto need = [](const std::string& v, const char* key) {
    if (v.empty()) throw ConfigError(std::string("missing required path '") + key + "'");
  };
  need(train_captions, "train_captions");
  need(train_features, "train_features");
  need(val_captions, "val_captions");
  need(val_features, "val_features");
  need(output_dir, "output_dir");
  if (vectorizers.mean_embedding) need(embeddings, "embeddings");
}

ModelShape RunConfig::model_shape(std::size_t vocab_size, std::size_t mean_embedding_dim,
                                  std::size_t output_dim) const {
  ModelShape s;
  s.vectorizers = vectorizers;
  s.vocab_size = vocab_size;
  s.mean_embedding_dim = vectorizers.mean_embedding ? mean_embedding_dim : 0;
  s.embedding_dim = embedding_dim;
  s.gru_hidden = vectorizers.gru ? gru_hidden : 0;
  s.hidden_layers = hidden_layers;
  s.output_dim = output_dim;
  s.output_activation = linear_output ? OutputActivation::kLinear : OutputActivation::kRelu;
  return s;
}

RunConfig parse_run_config(std::string_view json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(source + ": top level must be an object");

  RunConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& k = it.key();
      const auto& v = it.value();
      if (k == "vectorizers") {
        c.vectorizers = VectorizerSet::from_names(v.get<std::vector<std::string>>());
      } else if (k == "min_count") {
        c.min_count = v.get<std::uint64_t>();
      } else if (k == "embedding_dim") {
        c.embedding_dim = v.get<std::size_t>();
      } else if (k == "gru_hidden") {
        c.gru_hidden = v.get<std::size_t>();
      } else if (k == "hidden_layers") {
        c.hidden_layers = v.get<std::vector<std::size_t>>();
      } else if (k == "linear_output") {
        c.linear_output = v.get<bool>();
      } else if (k == "learning_rate") {
        c.learning_rate = v.get<double>();
      } else if (k == "decay") {
        c.decay = v.get<double>();
      } else if (k == "epsilon") {
        c.epsilon = v.get<double>();
      } else if (k == "dropout") {
        c.dropout = v.get<double>();
      } else if (k == "batch_size") {
        c.batch_size = v.get<std::size_t>();
      } else if (k == "max_epochs") {
        c.max_epochs = v.get<std::size_t>();
      } else if (k == "lr_patience") {
        c.lr_patience = v.get<std::size_t>();
      } else if (k == "stop_patience") {
        c.stop_patience = v.get<std::size_t>();
      } else if (k == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (k == "threads") {
        c.threads = v.get<std::size_t>();
      } else if (k == "validation_metric") {
        const auto m = v.get<std::string>();
        if (m == "recall_sum")
          c.validation_metric = ValidationMetric::kRecallSum;
        else if (m == "neg_mse")
          c.validation_metric = ValidationMetric::kNegMse;
        else
          throw ConfigError(source + ": unknown validation_metric '" + m + "'");
      } else if (k == "train_captions") {
        c.train_captions = v.get<std::string>();
      } else if (k == "train_features") {
        c.train_features = v.get<std::string>();
      } else if (k == "val_captions") {
        c.val_captions = v.get<std::string>();
      } else if (k == "val_features") {
        c.val_features = v.get<std::string>();
      } else if (k == "embeddings") {
        c.embeddings = v.get<std::string>();
      } else if (k == "output_dir") {
        c.output_dir = v.get<std::string>();
      } else {
        throw ConfigError(source + ": unknown key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.string());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["vectorizers"] = c.vectorizers.names();
  j["min_count"] = c.min_count;
  j["embedding_dim"] = c.embedding_dim;
  j["gru_hidden"] = c.gru_hidden;
  j["hidden_layers"] = c.hidden_layers;
  j["linear_output"] = c.linear_output;
  j["learning_rate"] = c.learning_rate;
  j["decay"] = c.decay;
  j["epsilon"] = c.epsilon;
  j["dropout"] = c.dropout;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["lr_patience"] = c.lr_patience;
  j["stop_patience"] = c.stop_patience;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["validation_metric"] = std::string(validation_metric_name(c.validation_metric));
  j["train_captions"] = c.train_captions;
  j["train_features"] = c.train_features;
  j["val_captions"] = c.val_captions;
  j["val_features"] = c.val_features;
  j["embeddings"] = c.embeddings;
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

}  // namespace w2vv
