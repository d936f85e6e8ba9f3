// SPDX-License-Identifier: Apache-2.0
#include "w2vv/data_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "w2vv/errors.hpp"

namespace w2vv {
namespace {

constexpr std::string_view kFeatureMagic = "W2VVFEAT";
constexpr std::uint32_t kFeatureVersion = 1;

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Iterates the lines of a buffer, tracking 1-based line numbers and
// stripping a trailing '\r'.
class LineReader {
 public:
  explicit LineReader(std::string_view buf) : buf_(buf) {}
  bool next(std::string_view& line) {
    if (pos_ >= buf_.size()) return false;
    auto end = buf_.find('\n', pos_);
    if (end == std::string_view::npos) end = buf_.size();
    line = buf_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t number() const { return number_; }

 private:
  std::string_view buf_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

bool parse_float(std::string_view tok, float& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Splits on runs of spaces/tabs.
void split_fields(std::string_view s, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    if (i >= s.size()) break;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
}

void append_float(std::string& out, float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  out.append(buf, ptr);
}

template <typename U>
void put_le(std::string& out, U v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>(b[sizeof(U) - 1 - i]));
  } else {
    out.append(reinterpret_cast<const char*>(&v), sizeof(U));
  }
}

template <typename U>
U get_le(std::string_view buf, std::size_t& pos, const std::string& source) {
  if (pos + sizeof(U) > buf.size())
    throw CorruptionError(source + ": truncated binary feature file");
  unsigned char b[sizeof(U)];
  std::memcpy(b, buf.data() + pos, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
  }
  pos += sizeof(U);
  U v;
  std::memcpy(&v, b, sizeof(U));
  return v;
}

FeatureStore load_feature_text(std::string_view buf, const std::string& source) {
  LineReader lines(buf);
  std::string_view line;
  std::vector<std::string_view> fields;
  std::vector<float> values;
  std::optional<FeatureStore> store;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw ParseError(source, lines.number(), "expected '<media-id>\\t<values>'");
    const std::string id(line.substr(0, tab));
    split_fields(line.substr(tab + 1), fields);
    if (fields.empty()) throw ParseError(source, lines.number(), "no feature values");
    values.resize(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_float(fields[i], values[i]))
        throw ParseError(source, lines.number(),
                         "bad number '" + std::string(fields[i]) + "'");
      if (!std::isfinite(values[i]))
        throw ValueError(source + ":" + std::to_string(lines.number()) +
                         ": non-finite feature value");
    }
    if (!store) store.emplace(values.size());
    if (values.size() != store->dim())
      throw DimensionMismatchError(source + ":" + std::to_string(lines.number()) + ": record '" +
                                   id + "' has " + std::to_string(values.size()) +
                                   " components, expected " + std::to_string(store->dim()));
    try {
      store->add(id, values);
    } catch (const DuplicateKeyError& e) {
      throw DuplicateKeyError(source + ":" + std::to_string(lines.number()) + ": " + e.what());
    }
  }
  if (!store) throw DatasetError(source + ": empty feature file");
  return std::move(*store);
}

FeatureStore load_feature_binary(std::string_view buf, const std::string& source) {
  std::size_t pos = kFeatureMagic.size();
  const auto version = get_le<std::uint32_t>(buf, pos, source);
  if (version != kFeatureVersion)
    throw UnsupportedVersionError(source + ": feature format version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(buf, pos, source);
  const auto dim = get_le<std::uint32_t>(buf, pos, source);
  if (dim == 0) throw CorruptionError(source + ": zero dimensionality");
  FeatureStore store(dim);
  std::vector<float> values(dim);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto len = get_le<std::uint16_t>(buf, pos, source);
    if (pos + len > buf.size()) throw CorruptionError(source + ": truncated record id");
    std::string id(buf.substr(pos, len));
    pos += len;
    for (auto& v : values) {
      v = get_le<float>(buf, pos, source);
      if (!std::isfinite(v))
        throw ValueError(source + ": non-finite value in record '" + id + "'");
    }
    store.add(std::move(id), values);
  }
  if (pos != buf.size()) throw CorruptionError(source + ": trailing bytes after last record");
  return store;
}

}  // namespace

CaptionKey CaptionKey::parse(std::string_view text) {
  const auto hash = text.rfind('#');
  if (hash == std::string_view::npos || hash == 0 || hash + 1 == text.size())
    throw ValueError("caption key '" + std::string(text) + "' is not <media-id>#<index>");
  const auto digits = text.substr(hash + 1);
  std::uint32_t index = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc() || ptr != digits.data() + digits.size())
    throw ValueError("caption key '" + std::string(text) + "' has a bad index");
  return {std::string(text.substr(0, hash)), index};
}

void CaptionSet::add(CaptionKey key, std::string text) {
  if (trim(text).empty()) throw ValueError("caption " + key.str() + " is blank");
  if (!seen_.insert(key).second) throw DuplicateKeyError("duplicate caption key " + key.str());
  records_.push_back({std::move(key), std::move(text)});
}

std::vector<std::string> CaptionSet::media_ids() const {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records_)
    if (seen.insert(r.key.media_id).second) out.push_back(r.key.media_id);
  return out;
}

FeatureStore::FeatureStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DimensionMismatchError("feature dimensionality must be positive");
}

void FeatureStore::add(std::string id, std::span<const float> values) {
  if (id.empty()) throw ValueError("empty media id");
  if (values.size() != dim_)
    throw DimensionMismatchError("record '" + id + "' has " + std::to_string(values.size()) +
                                 " components, expected " + std::to_string(dim_));
  for (float v : values)
    if (!std::isfinite(v)) throw ValueError("non-finite value in record '" + id + "'");
  if (index_.contains(id)) throw DuplicateKeyError("duplicate media id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), values.begin(), values.end());
}

std::optional<std::size_t> FeatureStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> FeatureStore::get(std::string_view id) const {
  auto i = find(id);
  if (!i) throw DatasetError("media id '" + std::string(id) + "' not in feature store");
  return at(*i);
}

void EmbeddingTable::add(std::string word, std::span<const float> values) {
  if (values.size() != dim_)
    throw DimensionMismatchError("embedding for '" + word + "' has " +
                                 std::to_string(values.size()) + " components, expected " +
                                 std::to_string(dim_));
  for (float v : values)
    if (!std::isfinite(v)) throw ValueError("non-finite embedding value for '" + word + "'");
  if (index_.contains(word)) throw DuplicateKeyError("duplicate embedding word '" + word + "'");
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  values_.insert(values_.end(), values.begin(), values.end());
}

std::span<const float> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return {};
  return std::span<const float>(values_).subspan(it->second * dim_, dim_);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("cannot write '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DatasetError("short write to '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CaptionSet load_captions(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  const auto source = path.string();
  LineReader lines(buf);
  std::string_view line;
  CaptionSet out;
  while (lines.next(line)) {
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw ParseError(source, lines.number(), "missing tab between key and caption");
    CaptionKey key;
    try {
      key = CaptionKey::parse(line.substr(0, tab));
    } catch (const ValueError& e) {
      throw ParseError(source, lines.number(), e.what());
    }
    const auto text = trim(line.substr(tab + 1));
    if (text.empty()) throw ParseError(source, lines.number(), "empty caption");
    try {
      out.add(std::move(key), std::string(text));
    } catch (const DuplicateKeyError& e) {
      throw DuplicateKeyError(source + ":" + std::to_string(lines.number()) + ": " + e.what());
    }
  }
  return out;
}

void save_captions(const std::filesystem::path& path, const CaptionSet& captions) {
  std::string out;
  for (const auto& r : captions.records()) {
    out += r.key.str();
    out += '\t';
    out += r.text;
    out += '\n';
  }
  write_file(path, out);
}

FeatureStore load_feature_store(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  if (std::string_view(buf).starts_with(kFeatureMagic))
    return load_feature_binary(buf, path.string());
  return load_feature_text(buf, path.string());
}

void save_feature_store(const std::filesystem::path& path, const FeatureStore& store,
                        FeatureFormat format) {
  std::string out;
  if (format == FeatureFormat::kBinary) {
    out.reserve(20 + store.size() * (store.dim() * 4 + 16));
    out += kFeatureMagic;
    put_le<std::uint32_t>(out, kFeatureVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto& id = store.ids()[i];
      if (id.size() > 0xFFFF) throw ValueError("media id longer than 65535 bytes");
      put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
      out += id;
      for (float v : store.at(i)) put_le<float>(out, v);
    }
  } else {
    for (std::size_t i = 0; i < store.size(); ++i) {
      out += store.ids()[i];
      out += '\t';
      const auto row = store.at(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) out += ' ';
        append_float(out, row[j]);
      }
      out += '\n';
    }
  }
  write_file(path, out);
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path,
                                    const std::unordered_set<std::string>* restrict_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open '" + path.string() + "'");
  const auto source = path.string();
  std::string line;
  std::size_t number = 0;
  std::vector<std::string_view> fields;

  std::size_t declared_rows = 0, dim = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!trim(line).empty()) break;
  }
  split_fields(trim(line), fields);
  {
    auto parse_size = [&](std::string_view s, std::size_t& v) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc() && ptr == s.data() + s.size();
    };
    if (fields.size() != 2 || !parse_size(fields[0], declared_rows) ||
        !parse_size(fields[1], dim) || dim == 0)
      throw ParseError(source, number, "expected header '<vocab-size> <dim>'");
  }

  EmbeddingTable table(dim);
  std::vector<float> values(dim);
  std::size_t rows_seen = 0, warnings = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (trim(view).empty()) continue;
    ++rows_seen;
    const auto sp = view.find_first_of(" \t");
    if (sp == std::string_view::npos || sp == 0)
      throw ParseError(source, number, "malformed embedding row");
    const std::string word(view.substr(0, sp));
    if (restrict_vocab && !restrict_vocab->contains(word)) continue;
    split_fields(view.substr(sp + 1), fields);
    if (fields.size() != dim)
      throw ParseError(source, number,
                       "row '" + word + "' has " + std::to_string(fields.size()) +
                           " values, expected " + std::to_string(dim));
    for (std::size_t i = 0; i < dim; ++i)
      if (!parse_float(fields[i], values[i]) || !std::isfinite(values[i]))
        throw ParseError(source, number, "bad value '" + std::string(fields[i]) + "'");
    if (table.contains(word)) {
      ++warnings;  // word2vec dumps occasionally repeat a token; first wins
      continue;
    }
    table.add(word, values);
  }
  if (rows_seen != declared_rows) ++warnings;
  table.set_warnings(warnings);
  return table;
}

void save_embedding_table(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  for (const auto& w : table.words()) {
    out += w;
    for (float v : table.find(w)) {
      out += ' ';
      append_float(out, v);
    }
    out += '\n';
  }
  write_file(path, out);
}

}  // namespace w2vv
