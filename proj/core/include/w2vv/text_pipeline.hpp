// SPDX-License-Identifier: Apache-2.0
//
// Caption text -> fixed-length sentence encodings: bag-of-words counts,
// mean pretrained word vector, and the token ids fed to the GRU.
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "w2vv/data_io.hpp"

namespace w2vv {

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source;
};

/// Lowercases ASCII letters and splits on maximal runs of ASCII
/// non-alphanumerics. Bytes >= 0x80 are word characters, so UTF-8 words
/// survive intact.
TokenSequence tokenize(std::string_view text);

class Vocabulary {
 public:
  Vocabulary() = default;
  /// `entries` must already be in canonical order (count desc, word asc).
  explicit Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> entries);

  std::size_t size() const noexcept { return words_.size(); }
  bool empty() const noexcept { return words_.empty(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  std::uint64_t count(std::size_t i) const { return counts_[i]; }
  std::optional<std::uint32_t> index(std::string_view word) const;

  /// `<word>\t<count>` lines in canonical order.
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text, const std::string& source = "vocab");
  /// FNV-1a 64 over serialize(), rendered as 16 hex digits.
  std::string content_hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Keeps words seen at least `min_count` times. Throws ConfigError when
/// min_count < 1 or nothing survives.
Vocabulary build_vocabulary(const CaptionSet& captions, std::uint64_t min_count);

/// Occurrence counts over the vocabulary; out-of-vocabulary tokens are ignored.
std::vector<float> encode_bow(const TokenSequence& tokens, const Vocabulary& vocab);

/// Mean of the table rows of matched tokens. Zero vector when nothing matches.
std::vector<float> encode_mean_embedding(const TokenSequence& tokens,
                                         const EmbeddingTable& table);

/// In-vocabulary token ids in surface order; OOV tokens are skipped.
std::vector<std::uint32_t> token_ids(const TokenSequence& tokens, const Vocabulary& vocab);

enum class SegmentKind : std::uint8_t { kBow = 0, kMeanEmbedding = 1, kGru = 2 };

std::string_view segment_name(SegmentKind kind);
/// Throws ConfigError for unknown names.
SegmentKind parse_segment_name(std::string_view name);

struct Segment {
  SegmentKind kind;
  std::size_t offset;
  std::size_t length;
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Ordered, contiguous segments of a composite sentence vector.
class SegmentLayout {
 public:
  SegmentLayout() = default;
  /// Parts must be in canonical order (bow, mean-embedding, gru) and unique.
  explicit SegmentLayout(std::span<const std::pair<SegmentKind, std::size_t>> parts);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  std::size_t total() const noexcept { return total_; }
  bool has(SegmentKind kind) const { return find(kind) != nullptr; }
  const Segment* find(SegmentKind kind) const;

  friend bool operator==(const SegmentLayout&, const SegmentLayout&) = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

struct SentenceVector {
  std::vector<float> data;
  SegmentLayout layout;

  /// Throws ConfigError when the segment is not present.
  std::span<const float> segment(SegmentKind kind) const;
};

/// Concatenates the parts in order, recording offsets. Duplicate or
/// out-of-order segments are rejected.
SentenceVector concat_multiscale(std::span<const std::pair<SegmentKind, std::vector<float>>> parts);

/// Which branches of the multi-scale vectorizer are active.
struct VectorizerSet {
  bool bow = true;
  bool mean_embedding = true;
  bool gru = true;

  bool any() const { return bow || mean_embedding || gru; }
  std::vector<std::string> names() const;
  static VectorizerSet from_names(std::span<const std::string> names);
  friend bool operator==(const VectorizerSet&, const VectorizerSet&) = default;
};

/// The theta-independent parts of one caption's encoding.
struct CaptionInputs {
  std::vector<float> bow;             // empty unless the bow branch is active
  std::vector<float> mean_embedding;  // empty unless active
  std::vector<std::uint32_t> token_ids;
};

/// Encodes captions for a fixed vocabulary, frozen embedding table and
/// active branch set.
class TextEncoder {
 public:
  TextEncoder(VectorizerSet active, Vocabulary vocab,
              std::shared_ptr<const EmbeddingTable> table, std::size_t gru_hidden);

  CaptionInputs encode(std::string_view caption) const;
  SegmentLayout layout() const;

  const VectorizerSet& active() const noexcept { return active_; }
  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const EmbeddingTable* table() const noexcept { return table_.get(); }

 private:
  VectorizerSet active_;
  Vocabulary vocab_;
  std::shared_ptr<const EmbeddingTable> table_;
  std::size_t gru_hidden_;
};

}  // namespace w2vv
