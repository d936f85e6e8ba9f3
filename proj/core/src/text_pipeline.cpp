// SPDX-License-Identifier: Apache-2.0
#include "w2vv/text_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>

#include "w2vv/errors.hpp"

namespace w2vv {
namespace {

bool is_word_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  out.source = std::string(text);
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      out.tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.tokens.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary(std::vector<std::pair<std::string, std::uint64_t>> entries) {
  words_.reserve(entries.size());
  counts_.reserve(entries.size());
  for (auto& [w, c] : entries) {
    if (w.empty()) throw VocabularyError("empty word in vocabulary");
    if (!index_.emplace(w, static_cast<std::uint32_t>(words_.size())).second)
      throw VocabularyError("duplicate vocabulary word '" + w + "'");
    words_.push_back(std::move(w));
    counts_.push_back(c);
  }
}

std::optional<std::uint32_t> Vocabulary::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    out += words_[i];
    out += '\t';
    out += std::to_string(counts_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text, const std::string& source) {
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw ParseError(source, line_no, "expected '<word>\\t<count>'");
    std::uint64_t count = 0;
    const auto digits = line.substr(tab + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), count);
    if (ec != std::errc() || ptr != digits.data() + digits.size())
      throw ParseError(source, line_no, "bad count");
    entries.emplace_back(std::string(line.substr(0, tab)), count);
  }
  return Vocabulary(std::move(entries));
}

std::string Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vocabulary build_vocabulary(const CaptionSet& captions, std::uint64_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& r : captions.records())
    for (auto& t : tokenize(r.text).tokens) ++counts[std::move(t)];
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : counts)
    if (c >= min_count) kept.emplace_back(w, c);
  if (kept.empty())
    throw ConfigError("vocabulary is empty at min_count=" + std::to_string(min_count));
  // counts is ordered by word, so a stable sort on count keeps word-asc ties.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return Vocabulary(std::move(kept));
}

std::vector<float> encode_bow(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::vector<float> out(vocab.size(), 0.0f);
  for (const auto& t : tokens.tokens)
    if (auto i = vocab.index(t)) out[*i] += 1.0f;
  return out;
}

std::vector<float> encode_mean_embedding(const TokenSequence& tokens,
                                         const EmbeddingTable& table) {
  std::vector<double> acc(table.dim(), 0.0);
  std::size_t matched = 0;
  for (const auto& t : tokens.tokens) {
    const auto row = table.find(t);
    if (row.empty()) continue;
    ++matched;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += row[j];
  }
  std::vector<float> out(table.dim(), 0.0f);
  if (matched == 0) return out;
  for (std::size_t j = 0; j < acc.size(); ++j)
    out[j] = static_cast<float>(acc[j] / static_cast<double>(matched));
  return out;
}

std::vector<std::uint32_t> token_ids(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.tokens.size());
  for (const auto& t : tokens.tokens)
    if (auto i = vocab.index(t)) ids.push_back(*i);
  return ids;
}

std::string_view segment_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::kBow:
      return "bow";
    case SegmentKind::kMeanEmbedding:
      return "mean-embedding";
    case SegmentKind::kGru:
      return "gru";
  }
  return "?";
}

SegmentKind parse_segment_name(std::string_view name) {
  if (name == "bow") return SegmentKind::kBow;
  if (name == "mean-embedding" || name == "word2vec") return SegmentKind::kMeanEmbedding;
  if (name == "gru") return SegmentKind::kGru;
  throw ConfigError("unknown vectorizer '" + std::string(name) + "'");
}

SegmentLayout::SegmentLayout(std::span<const std::pair<SegmentKind, std::size_t>> parts) {
  int last = -1;
  for (const auto& [kind, len] : parts) {
    const int k = static_cast<int>(kind);
    if (k == last) throw ConfigError("duplicate segment '" + std::string(segment_name(kind)) + "'");
    if (k < last)
      throw ConfigError("segment '" + std::string(segment_name(kind)) +
                        "' out of canonical order (bow, mean-embedding, gru)");
    last = k;
    segments_.push_back({kind, total_, len});
    total_ += len;
  }
}

const Segment* SegmentLayout::find(SegmentKind kind) const {
  for (const auto& s : segments_)
    if (s.kind == kind) return &s;
  return nullptr;
}

std::span<const float> SentenceVector::segment(SegmentKind kind) const {
  const auto* s = layout.find(kind);
  if (!s) throw ConfigError("segment '" + std::string(segment_name(kind)) + "' not present");
  return std::span<const float>(data).subspan(s->offset, s->length);
}

SentenceVector concat_multiscale(
    std::span<const std::pair<SegmentKind, std::vector<float>>> parts) {
  if (parts.empty()) throw ConfigError("concat_multiscale needs at least one part");
  std::vector<std::pair<SegmentKind, std::size_t>> sizes;
  std::size_t total = 0;
  for (const auto& [kind, v] : parts) {
    sizes.emplace_back(kind, v.size());
    total += v.size();
  }
  SentenceVector out{{}, SegmentLayout(sizes)};
  out.data.reserve(total);
  for (const auto& [kind, v] : parts) out.data.insert(out.data.end(), v.begin(), v.end());
  return out;
}

std::vector<std::string> VectorizerSet::names() const {
  std::vector<std::string> out;
  if (bow) out.emplace_back(segment_name(SegmentKind::kBow));
  if (mean_embedding) out.emplace_back(segment_name(SegmentKind::kMeanEmbedding));
  if (gru) out.emplace_back(segment_name(SegmentKind::kGru));
  return out;
}

VectorizerSet VectorizerSet::from_names(std::span<const std::string> names) {
  VectorizerSet s{false, false, false};
  for (const auto& n : names) {
    switch (parse_segment_name(n)) {
      case SegmentKind::kBow:
        s.bow = true;
        break;
      case SegmentKind::kMeanEmbedding:
        s.mean_embedding = true;
        break;
      case SegmentKind::kGru:
        s.gru = true;
        break;
    }
  }
  if (!s.any()) throw ConfigError("at least one vectorizer must be selected");
  return s;
}

TextEncoder::TextEncoder(VectorizerSet active, Vocabulary vocab,
                         std::shared_ptr<const EmbeddingTable> table, std::size_t gru_hidden)
    : active_(active), vocab_(std::move(vocab)), table_(std::move(table)), gru_hidden_(gru_hidden) {
  if (!active_.any()) throw ConfigError("at least one vectorizer must be selected");
  if ((active_.bow || active_.gru) && vocab_.empty())
    throw ConfigError("bow/gru branches need a non-empty vocabulary");
  if (active_.mean_embedding && !table_)
    throw ConfigError("mean-embedding branch needs a pretrained embedding table");
  if (active_.gru && gru_hidden_ == 0) throw ConfigError("gru hidden size must be positive");
}

CaptionInputs TextEncoder::encode(std::string_view caption) const {
  const auto tokens = tokenize(caption);
  CaptionInputs out;
  if (active_.bow) out.bow = encode_bow(tokens, vocab_);
  if (active_.mean_embedding) out.mean_embedding = encode_mean_embedding(tokens, *table_);
  if (active_.gru) out.token_ids = token_ids(tokens, vocab_);
  return out;
}

SegmentLayout TextEncoder::layout() const {
  std::vector<std::pair<SegmentKind, std::size_t>> parts;
  if (active_.bow) parts.emplace_back(SegmentKind::kBow, vocab_.size());
  if (active_.mean_embedding) parts.emplace_back(SegmentKind::kMeanEmbedding, table_->dim());
  if (active_.gru) parts.emplace_back(SegmentKind::kGru, gru_hidden_);
  return SegmentLayout(parts);
}

}  // namespace w2vv
