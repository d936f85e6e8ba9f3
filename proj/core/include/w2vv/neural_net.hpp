// SPDX-License-Identifier: Apache-2.0
//
// Sentence-to-visual-feature network: a GRU sentence encoder whose final
// state joins the bag-of-words and mean-embedding segments, followed by a
// ReLU multilayer perceptron that regresses the target visual feature.
//
// Every routine is templated on the scalar type. Production code uses
// float; the gradient checker instantiates the same code with double so
// finite differences resolve well below the 1e-4 tolerance. Reductions
// always accumulate in double.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "w2vv/data_io.hpp"
#include "w2vv/tensor.hpp"
#include "w2vv/text_pipeline.hpp"

namespace w2vv {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };
enum class OutputActivation { kRelu, kLinear };

template <typename T>
struct GRUParams {
  Tensor<T> embedding;  // vocab x e, trainable lookup table
  Tensor<T> update_input, update_recurrent, update_bias;
  Tensor<T> reset_input, reset_recurrent, reset_bias;
  Tensor<T> candidate_input, candidate_recurrent, candidate_bias;

  std::size_t input_dim() const { return embedding.cols(); }
  std::size_t hidden() const { return update_bias.rows(); }
};

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // out x in
  Tensor<T> bias;    // out x 1
};

template <typename T>
struct MLPParams {
  std::vector<DenseLayer<T>> layers;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
};

/// All trainable tensors plus the architecture facts needed to run them.
template <typename T>
struct W2VVParams {
  SegmentLayout layout;  // expected composition of the MLP input
  std::optional<GRUParams<T>> gru;
  MLPParams<T> mlp;
  OutputActivation output_activation = OutputActivation::kRelu;

  /// Visits (name, tensor) in canonical serialization order.
  void for_each_tensor(const std::function<void(const std::string&, Tensor<T>&)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const Tensor<T>&)>& fn) const;

  std::size_t parameter_count() const;
  /// Layer widths from the MLP input through the output, e.g. 500-2048-2048.
  std::vector<std::size_t> layer_sizes() const;
  /// Throws ShapeError when tensors do not chain or disagree with the layout.
  void validate() const;

  template <typename U>
  W2VVParams<U> cast() const;

  friend bool operator==(const W2VVParams& a, const W2VVParams& b) {
    bool eq = a.layout == b.layout && a.output_activation == b.output_activation &&
              a.gru.has_value() == b.gru.has_value() &&
              a.mlp.layers.size() == b.mlp.layers.size();
    if (!eq) return false;
    std::vector<const Tensor<T>*> ta, tb;
    a.for_each_tensor([&](const std::string&, const Tensor<T>& t) { ta.push_back(&t); });
    b.for_each_tensor([&](const std::string&, const Tensor<T>& t) { tb.push_back(&t); });
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (!(*ta[i] == *tb[i])) return false;
    return true;
  }
};

/// One gradient tensor per parameter tensor, same shapes.
template <typename T>
struct GradSet {
  W2VVParams<T> values;

  static GradSet zeros_like(const W2VVParams<T>& params);
  void set_zero();
  /// this += other
  void add(const GradSet& other);
  void scale(double factor);
};

/// Architecture description used to allocate and initialize parameters.
struct ModelShape {
  VectorizerSet vectorizers;
  std::size_t vocab_size = 0;          // bow width and GRU lookup rows
  std::size_t mean_embedding_dim = 0;  // frozen pretrained table width
  std::size_t embedding_dim = 0;       // GRU input width e
  std::size_t gru_hidden = 0;
  std::vector<std::size_t> hidden_layers;
  std::size_t output_dim = 0;
  OutputActivation output_activation = OutputActivation::kRelu;

  SegmentLayout layout() const;
};

/// Embedding rows for vocabulary words found in `pretrained` are copied
/// verbatim; other rows and all affine weights are drawn uniformly
/// (weights scaled by sqrt(6 / (fan_in + fan_out))); biases are zero.
/// Throws ConfigError when the pretrained width differs from embedding_dim.
W2VVParams<float> init_params(const ModelShape& shape, const Vocabulary& vocab,
                              const EmbeddingTable* pretrained, std::uint64_t seed);

template <typename T>
struct GruStepCache {
  std::vector<T> h_prev;
  std::vector<T> update;     // z_t
  std::vector<T> reset;      // r_t
  std::vector<T> candidate;  // tanh candidate state
};

template <typename T>
struct GruTrace {
  std::vector<std::uint32_t> token_ids;
  std::vector<GruStepCache<T>> steps;
};

template <typename T>
struct MlpTrace {
  std::vector<std::vector<T>> inputs;           // per layer, after dropout
  std::vector<std::vector<T>> pre_activations;  // per layer
  std::vector<std::vector<T>> dropout_scales;   // per hidden layer; empty in eval
  std::vector<std::size_t> input_nonzero;       // nonzero columns of inputs[0]
};

template <typename T>
struct ForwardTrace {
  GruTrace<T> gru;
  MlpTrace<T> mlp;
};

/// One recurrence step; fills `cache` when non-null. Throws NumericError
/// naming the gate that produced a non-finite value.
template <typename T>
std::vector<T> gru_step(const GRUParams<T>& p, std::span<const T> input,
                        std::span<const T> h_prev, GruStepCache<T>* cache = nullptr);

/// Runs the GRU from a zero state over the ids and returns the last state.
/// An empty sequence returns the zero vector. Throws VocabularyError for ids
/// outside the lookup table.
template <typename T>
std::vector<T> gru_encode(const GRUParams<T>& p, std::span<const std::uint32_t> ids,
                          GruTrace<T>* trace = nullptr);

/// ReLU MLP. In train mode inverted dropout is applied to every hidden
/// layer (never the output); `rng` is required then.
template <typename T>
std::vector<T> mlp_forward(const MLPParams<T>& p, OutputActivation out_act,
                           std::span<const T> input, Mode mode, double dropout_rate, Rng* rng,
                           MlpTrace<T>* trace = nullptr);

/// Builds the composite sentence vector for `inputs` under the model's
/// layout (running the GRU when active). Throws ShapeError on any segment
/// width disagreement.
template <typename T>
std::vector<T> sentence_input(const W2VVParams<T>& model, const CaptionInputs& inputs,
                              GruTrace<T>* trace = nullptr);

/// Full forward pass r(q).
template <typename T>
std::vector<T> forward(const W2VVParams<T>& model, const CaptionInputs& inputs, Mode mode,
                       double dropout_rate, Rng* rng, ForwardTrace<T>* trace = nullptr);

/// Accumulates exact gradients of a scalar loss with respect to every
/// parameter tensor into `grads`, given dL/dr and the trace from the
/// matching forward call.
template <typename T>
void backward(const W2VVParams<T>& model, const ForwardTrace<T>& trace,
              std::span<const T> d_output, GradSet<T>& grads);

/// Encoder plus parameters: everything needed to map caption text to r(q).
struct W2VVModel {
  TextEncoder encoder;
  W2VVParams<float> params;

  std::vector<float> predict(std::string_view caption) const;
  /// Float-typed composite s(q) with its declared layout.
  SentenceVector sentence_vector(std::string_view caption) const;
};

}  // namespace w2vv
