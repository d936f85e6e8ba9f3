// SPDX-License-Identifier: Apache-2.0
//
// Test-only helpers: scratch directories and a seeded synthetic dataset whose
// captions carry topic words and one medium-specific word, so a correct
// trainer can separate every medium.
#pragma once

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "w2vv/data_io.hpp"

namespace w2vv::testing {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("w2vv_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct SyntheticFixture {
  CaptionSet captions;
  FeatureStore features;
  EmbeddingTable embeddings;
};

struct FixtureSpec {
  std::uint64_t seed = 7;
  std::size_t media = 20;
  std::size_t captions_per_medium = 5;
  std::size_t vocab = 50;  // 10 common + 20 topic + one word per medium
  std::size_t dim = 16;
  std::size_t topics = 4;
};

inline std::string fixture_word(std::size_t i) {
  return (i < 10 ? "w0" : "w") + std::to_string(i);
}

inline SyntheticFixture make_fixture(const FixtureSpec& spec = {}) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](std::size_t n) { return std::size_t(unit(rng) * double(n)) % n; };

  const std::size_t common = 10, per_topic = 5;
  const std::size_t medium_base = common + spec.topics * per_topic;

  SyntheticFixture f{CaptionSet{}, FeatureStore(spec.dim), EmbeddingTable(spec.dim)};
  for (std::size_t m = 0; m < spec.media; ++m) {
    const std::size_t topic = m % spec.topics;
    const std::string id = "img" + std::to_string(m) + ".jpg";
    std::vector<float> feat(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) {
      const bool own = (j * spec.topics / spec.dim) == topic;
      feat[j] = static_cast<float>((own ? 1.0 : 0.1) + 0.4 * unit(rng));
    }
    f.features.add(id, feat);
    const std::size_t medium_word = medium_base + (m % (spec.vocab - medium_base));
    for (std::size_t c = 0; c < spec.captions_per_medium; ++c) {
      std::vector<std::string> words{fixture_word(pick(common)),
                                     fixture_word(common + topic * per_topic + pick(per_topic)),
                                     fixture_word(common + topic * per_topic + pick(per_topic)),
                                     fixture_word(medium_word), fixture_word(pick(common))};
      std::shuffle(words.begin() + 1, words.end(), rng);
      std::string text = words[0];
      text[0] = static_cast<char>(std::toupper(text[0]));
      for (std::size_t i = 1; i < words.size(); ++i) text += " " + words[i];
      text += ".";
      f.captions.add({id, static_cast<std::uint32_t>(c)}, text);
    }
  }
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  for (std::size_t w = 0; w < spec.vocab + 5; ++w) {
    std::vector<float> row(spec.dim);
    for (auto& v : row) v = static_cast<float>(sym(rng));
    f.embeddings.add(fixture_word(w), row);
  }
  return f;
}

struct FixtureFiles {
  std::filesystem::path captions, features, embeddings;
};

inline FixtureFiles write_fixture(const SyntheticFixture& f, const std::filesystem::path& dir) {
  FixtureFiles out{dir / "captions.txt", dir / "features.txt", dir / "embeddings.txt"};
  save_captions(out.captions, f.captions);
  save_feature_store(out.features, f.features, FeatureFormat::kText);
  save_embedding_table(out.embeddings, f.embeddings);
  return out;
}

}  // namespace w2vv::testing
