// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint directory layout:
//   manifest.json  format version, segment layout, tensor names/shapes in
//                  serialization order, hyperparameters, vocabulary hash
//   params.bin     little-endian float32 tensors concatenated in manifest order
//   vocab.txt      `<word>\t<count>` lines (absent when no bow/gru branch)
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "w2vv/neural_net.hpp"
#include "w2vv/run_config.hpp"

namespace w2vv {

inline constexpr int kCheckpointFormatVersion = 1;

struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

struct CheckpointManifest {
  int format_version = kCheckpointFormatVersion;
  SegmentLayout layout;
  std::vector<TensorSpec> tensors;
  std::vector<std::size_t> layer_sizes;
  OutputActivation output_activation = OutputActivation::kRelu;
  std::size_t embedding_dim = 0;  // GRU input width (0 without a GRU)
  std::string vocabulary_hash;    // empty without a vocabulary
  RunConfig config;               // dataset/output paths are not recorded
};

/// Writes manifest.json, params.bin and (if non-empty) vocab.txt into `dir`,
/// creating it as needed. Output bytes are a pure function of the inputs.
void save_checkpoint(const std::filesystem::path& dir, const W2VVParams<float>& params,
                     const Vocabulary& vocab, const RunConfig& config);

/// Throws UnsupportedVersionError on a format mismatch and CorruptionError
/// when params.bin disagrees with the manifest or vocab.txt with its hash.
std::pair<W2VVParams<float>, CheckpointManifest> load_checkpoint(
    const std::filesystem::path& dir);

/// Loaded vocabulary (empty if the checkpoint has none).
Vocabulary load_checkpoint_vocabulary(const std::filesystem::path& dir,
                                      const CheckpointManifest& manifest);

/// Rebuilds a ready-to-run model. The frozen mean-embedding table is read
/// from `embeddings` when given, otherwise from the path recorded at
/// training time. `restrict_words` limits which table rows are kept, e.g.
/// to the tokens of the captions about to be encoded.
W2VVModel load_model(const std::filesystem::path& dir,
                     const std::filesystem::path& embeddings = {},
                     const std::unordered_set<std::string>* restrict_words = nullptr);

}  // namespace w2vv
