// SPDX-License-Identifier: Apache-2.0
//
// Readers and writers for the on-disk artifacts: caption files, feature
// stores (text and binary), and word2vec-style embedding tables.
//
// All loaded containers are immutable after construction and may be shared
// read-only across threads.
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace w2vv {

/// Identifies one caption: `<media-id>#<index>`.
struct CaptionKey {
  std::string media_id;
  std::uint32_t index = 0;

  std::string str() const { return media_id + "#" + std::to_string(index); }
  /// Splits on the last `#`; throws ValueError when absent or malformed.
  static CaptionKey parse(std::string_view text);

  friend auto operator<=>(const CaptionKey&, const CaptionKey&) = default;
  friend bool operator==(const CaptionKey&, const CaptionKey&) = default;
};

struct CaptionKeyHash {
  std::size_t operator()(const CaptionKey& k) const noexcept {
    return std::hash<std::string>{}(k.media_id) * 1000003u ^ k.index;
  }
};

struct CaptionRecord {
  CaptionKey key;
  std::string text;
};

class CaptionSet {
 public:
  /// Throws DuplicateKeyError or ValueError (blank text).
  void add(CaptionKey key, std::string text);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<CaptionRecord>& records() const noexcept { return records_; }
  const CaptionRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Media ids in order of first appearance.
  std::vector<std::string> media_ids() const;

 private:
  std::vector<CaptionRecord> records_;
  std::unordered_set<CaptionKey, CaptionKeyHash> seen_;
};

/// id -> d-dimensional feature vector, in insertion order.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim);

  /// Validates dimensionality, finiteness and id uniqueness.
  void add(std::string id, std::span<const float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> at(std::size_t i) const {
    return std::span<const float>(values_).subspan(i * dim_, dim_);
  }
  std::optional<std::size_t> find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id).has_value(); }
  /// Throws DatasetError when the id is unknown.
  std::span<const float> get(std::string_view id) const;

  friend bool operator==(const FeatureStore& a, const FeatureStore& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Pretrained word vectors. Frozen once loaded.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  void add(std::string word, std::span<const float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  /// Empty span when the word is absent.
  std::span<const float> find(std::string_view word) const;
  bool contains(std::string_view word) const { return !find(word).empty(); }

  /// Header/row-count disagreements tolerated while loading.
  std::size_t warnings() const noexcept { return warnings_; }
  void set_warnings(std::size_t n) noexcept { warnings_ = n; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t warnings_ = 0;
};

enum class FeatureFormat { kText, kBinary };

/// Lines `<media-id>#<index>\t<caption>`; blank lines are skipped.
CaptionSet load_captions(const std::filesystem::path& path);
void save_captions(const std::filesystem::path& path, const CaptionSet& captions);

/// Auto-detects the binary format by its magic bytes.
FeatureStore load_feature_store(const std::filesystem::path& path);
void save_feature_store(const std::filesystem::path& path, const FeatureStore& store,
                        FeatureFormat format);

/// word2vec text format. With `restrict_vocab`, rows for other words are
/// skipped without being parsed.
EmbeddingTable load_embedding_table(
    const std::filesystem::path& path,
    const std::unordered_set<std::string>* restrict_vocab = nullptr);
void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table);

/// Whole-file read; throws DatasetError if unreadable.
std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace w2vv
