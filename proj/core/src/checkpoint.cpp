// SPDX-License-Identifier: Apache-2.0
#include "w2vv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <json.hpp>
#include <memory>

#include "w2vv/data_io.hpp"
#include "w2vv/errors.hpp"

namespace w2vv {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kParamsFile = "params.bin";
constexpr const char* kVocabFile = "vocab.txt";

static_assert(sizeof(float) == 4);

RunConfig strip_paths(RunConfig c) {
  c.train_captions.clear();
  c.train_features.clear();
  c.val_captions.clear();
  c.val_features.clear();
  c.output_dir.clear();
  return c;
}

W2VVParams<float> skeleton(const SegmentLayout& layout, std::size_t mlp_layers,
                           OutputActivation act) {
  W2VVParams<float> p;
  p.layout = layout;
  p.output_activation = act;
  if (layout.has(SegmentKind::kGru)) p.gru.emplace();
  p.mlp.layers.resize(mlp_layers);
  return p;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const W2VVParams<float>& params,
                     const Vocabulary& vocab, const RunConfig& config) {
  params.validate();
  fs::create_directories(dir);

  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  json segments = json::array();
  for (const auto& s : params.layout.segments())
    segments.push_back({{"name", std::string(segment_name(s.kind))},
                        {"offset", s.offset},
                        {"length", s.length}});
  manifest["segments"] = segments;

  json tensors = json::array();
  std::string blob;
  blob.reserve(params.parameter_count() * 4);
  params.for_each_tensor([&](const std::string& name, const Tensor<float>& t) {
    tensors.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}});
    for (float v : t.flat()) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  });
  manifest["tensors"] = tensors;
  manifest["layer_sizes"] = params.layer_sizes();
  manifest["parameter_count"] = params.parameter_count();
  manifest["output_activation"] =
      params.output_activation == OutputActivation::kRelu ? "relu" : "linear";
  manifest["embedding_dim"] = params.gru ? params.gru->input_dim() : 0;
  manifest["vocabulary_size"] = vocab.size();
  manifest["vocabulary_hash"] = vocab.empty() ? std::string() : vocab.content_hash();
  manifest["hyperparameters"] = json::parse(run_config_to_json(strip_paths(config)));

  write_file(dir / kParamsFile, blob);
  if (!vocab.empty()) write_file(dir / kVocabFile, vocab.serialize());
  write_file(dir / kManifestFile, manifest.dump(2) + "\n");
}

std::pair<W2VVParams<float>, CheckpointManifest> load_checkpoint(const fs::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw CorruptionError(manifest_path.string() + ": " + e.what());
  }

  CheckpointManifest m;
  std::size_t mlp_layers = 0;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kCheckpointFormatVersion)
      throw UnsupportedVersionError(manifest_path.string() + ": checkpoint format version " +
                                    std::to_string(m.format_version) + " (supported: " +
                                    std::to_string(kCheckpointFormatVersion) + ")");
    std::vector<std::pair<SegmentKind, std::size_t>> parts;
    std::size_t expect_offset = 0;
    for (const auto& s : j.at("segments")) {
      const auto kind = parse_segment_name(s.at("name").get<std::string>());
      const auto off = s.at("offset").get<std::size_t>();
      const auto len = s.at("length").get<std::size_t>();
      if (off != expect_offset) throw CorruptionError("segment offsets are not contiguous");
      expect_offset += len;
      parts.emplace_back(kind, len);
    }
    m.layout = SegmentLayout(parts);
    for (const auto& t : j.at("tensors")) {
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 2) throw CorruptionError("tensor shape must have two entries");
      m.tensors.push_back({t.at("name").get<std::string>(), shape[0], shape[1]});
      if (m.tensors.back().name.ends_with(".weight")) ++mlp_layers;
    }
    m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto act = j.at("output_activation").get<std::string>();
    if (act != "relu" && act != "linear") throw CorruptionError("unknown output_activation");
    m.output_activation = act == "relu" ? OutputActivation::kRelu : OutputActivation::kLinear;
    m.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    m.vocabulary_hash = j.at("vocabulary_hash").get<std::string>();
    m.config = parse_run_config(j.at("hyperparameters").dump(), manifest_path.string());
  } catch (const json::exception& e) {
    throw CorruptionError(manifest_path.string() + ": " + e.what());
  }

  auto params = skeleton(m.layout, mlp_layers, m.output_activation);
  std::vector<Tensor<float>*> slots;
  std::vector<std::string> names;
  params.for_each_tensor([&](const std::string& name, Tensor<float>& t) {
    names.push_back(name);
    slots.push_back(&t);
  });
  if (names.size() != m.tensors.size())
    throw CorruptionError(manifest_path.string() + ": tensor list does not match the layout");

  const auto blob = read_file(dir / kParamsFile);
  std::size_t expected_bytes = 0;
  for (const auto& t : m.tensors) expected_bytes += t.rows * t.cols * 4;
  if (blob.size() != expected_bytes)
    throw CorruptionError((dir / kParamsFile).string() + " holds " + std::to_string(blob.size()) +
                          " bytes but the manifest declares " + std::to_string(expected_bytes));

  std::size_t pos = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& spec = m.tensors[i];
    if (spec.name != names[i])
      throw CorruptionError("tensor " + std::to_string(i) + " is '" + spec.name + "', expected '" +
                            names[i] + "'");
    Tensor<float> t(spec.rows, spec.cols);
    for (auto& v : t.flat()) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= std::uint32_t(static_cast<unsigned char>(blob[pos + b])) << (8 * b);
      pos += 4;
      v = std::bit_cast<float>(bits);
    }
    *slots[i] = std::move(t);
  }
  try {
    params.validate();
  } catch (const ShapeError& e) {
    throw CorruptionError(manifest_path.string() + ": " + e.what());
  }
  if (params.layer_sizes() != m.layer_sizes)
    throw CorruptionError(manifest_path.string() + ": layer_sizes disagree with the tensors");
  return {std::move(params), std::move(m)};
}

Vocabulary load_checkpoint_vocabulary(const fs::path& dir, const CheckpointManifest& manifest) {
  if (manifest.vocabulary_hash.empty()) return {};
  const auto path = dir / kVocabFile;
  auto vocab = Vocabulary::deserialize(read_file(path), path.string());
  if (vocab.content_hash() != manifest.vocabulary_hash)
    throw CorruptionError(path.string() + " does not match the manifest's vocabulary hash");
  return vocab;
}

W2VVModel load_model(const fs::path& dir, const fs::path& embeddings,
                     const std::unordered_set<std::string>* restrict_words) {
  auto [params, manifest] = load_checkpoint(dir);
  auto vocab = load_checkpoint_vocabulary(dir, manifest);
  if (params.gru && params.gru->embedding.rows() != vocab.size())
    throw CorruptionError("GRU lookup table has " + std::to_string(params.gru->embedding.rows()) +
                          " rows but the vocabulary has " + std::to_string(vocab.size()));
  if (const auto* bow = params.layout.find(SegmentKind::kBow); bow && bow->length != vocab.size())
    throw CorruptionError("bow segment width disagrees with the vocabulary");

  VectorizerSet active{params.layout.has(SegmentKind::kBow),
                       params.layout.has(SegmentKind::kMeanEmbedding),
                       params.layout.has(SegmentKind::kGru)};
  std::shared_ptr<const EmbeddingTable> table;
  if (const auto* seg = params.layout.find(SegmentKind::kMeanEmbedding)) {
    const fs::path path = embeddings.empty() ? fs::path(manifest.config.embeddings) : embeddings;
    if (path.empty())
      throw ConfigError("model uses mean-embedding but no embedding file is available");
    auto t = std::make_shared<EmbeddingTable>(load_embedding_table(path, restrict_words));
    if (t->dim() != seg->length)
      throw DimensionMismatchError("embedding file is " + std::to_string(t->dim()) +
                                   "-dim but the model expects " + std::to_string(seg->length));
    table = std::move(t);
  }
  const std::size_t gru_hidden = params.gru ? params.gru->hidden() : 0;
  TextEncoder encoder(active, std::move(vocab), std::move(table), gru_hidden);
  return W2VVModel{std::move(encoder), std::move(params)};
}

}  // namespace w2vv
