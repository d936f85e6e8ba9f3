// SPDX-License-Identifier: Apache-2.0
//
// Caption retrieval in the visual feature space: captions are mapped to
// predicted features once, then every query feature ranks the whole pool
// by cosine similarity.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "w2vv/data_io.hpp"
#include "w2vv/neural_net.hpp"

namespace w2vv {

/// a.b / (|a| |b|), or 0 when either norm is zero. Throws ShapeError on a
/// length mismatch.
double cosine(std::span<const float> a, std::span<const float> b);

/// Captions encoded into the visual space, row i belonging to keys[i].
class EncodedPool {
 public:
  EncodedPool() = default;
  EncodedPool(std::vector<CaptionKey> keys, std::size_t dim, std::vector<float> rows,
              std::string source_id = {});

  std::size_t size() const noexcept { return keys_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<CaptionKey>& keys() const noexcept { return keys_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(rows_).subspan(i * dim_, dim_);
  }
  double norm(std::size_t i) const { return norms_[i]; }
  /// Position of keys()[i] in ascending key order; used for tie-breaks.
  std::uint32_t key_rank(std::size_t i) const { return key_rank_[i]; }
  /// Identity of whatever produced the rows (checkpoint path, file name).
  const std::string& source_id() const noexcept { return source_id_; }

  /// Ids are written as `media-id#index`.
  FeatureStore to_feature_store() const;
  /// Every id must parse as a caption key.
  static EncodedPool from_feature_store(const FeatureStore& store, std::string source_id = {});

  friend bool operator==(const EncodedPool& a, const EncodedPool& b) {
    return a.keys_ == b.keys_ && a.dim_ == b.dim_ && a.rows_ == b.rows_;
  }

 private:
  std::vector<CaptionKey> keys_;
  std::size_t dim_ = 0;
  std::vector<float> rows_;
  std::vector<double> norms_;
  std::vector<std::uint32_t> key_rank_;
  std::string source_id_;
};

/// Eval-mode predictions for every caption. Results do not depend on
/// `threads`. Encoding failures are rethrown with the caption key prepended.
EncodedPool encode_pool(const W2VVModel& model, const CaptionSet& captions,
                        std::size_t threads = 1, std::string source_id = {});

struct RankedList {
  std::string query_id;
  std::vector<CaptionKey> keys;      // by descending similarity
  std::vector<double> similarities;  // non-increasing
};

/// Full descending sort by cosine; ties broken by ascending caption key.
RankedList rank_captions(std::string_view query_id, std::span<const float> query,
                         const EncodedPool& pool);

/// Ranks every query of the store against the pool; output order follows
/// the store, independent of `threads`.
std::vector<RankedList> rank_all(const FeatureStore& queries, const EncodedPool& pool,
                                 std::size_t threads = 1);

enum class RelevanceConvention {
  kSharedMedia,     // every caption of the query's medium is relevant
  kSingleAnnotated  // exactly one annotated caption per query
};

/// media-id -> relevant caption keys.
using Relevance = std::map<std::string, std::set<CaptionKey>, std::less<>>;

/// Builds relevance from caption keys: captions are relevant to the medium
/// named in their key. Under kSingleAnnotated each medium must own exactly
/// one key, otherwise ProtocolError.
Relevance build_relevance(std::span<const CaptionKey> keys, RelevanceConvention convention);

/// 1-based rank of the highest-ranked relevant caption. Throws
/// ProtocolError when the query has no relevant caption in the list.
std::size_t best_relevant_rank(const RankedList& ranking, const Relevance& relevance);

struct MetricsReport {
  std::vector<std::pair<std::size_t, double>> recall;  // (K, R@K in percent)
  double mir = 0.0;
  std::size_t queries = 0;

  double recall_at(std::size_t k) const;
  /// {"r1":..,"r5":..,"r10":..,"mir":..,"queries":..}
  std::string to_json() const;
};

/// R@K = 100 * fraction of queries whose best relevant rank is <= K.
std::vector<std::pair<std::size_t, double>> recall_from_ranks(std::span<const std::size_t> best_ranks,
                                                              std::span<const std::size_t> ks);
double mir_from_ranks(std::span<const std::size_t> best_ranks);

/// Throws ProtocolError listing every query without a relevant caption.
std::vector<std::size_t> best_ranks(std::span<const RankedList> rankings, const Relevance& relevance);

std::vector<std::pair<std::size_t, double>> recall_at_k(std::span<const RankedList> rankings,
                                                        const Relevance& relevance,
                                                        std::span<const std::size_t> ks);
double mean_inverted_rank(std::span<const RankedList> rankings, const Relevance& relevance);

MetricsReport evaluate(std::span<const RankedList> rankings, const Relevance& relevance,
                       std::span<const std::size_t> ks = std::array<std::size_t, 3>{1, 5, 10});

/// Computes best ranks directly (without materializing ranked lists) for
/// every query in `queries` against `pool`.
MetricsReport evaluate_pool(const FeatureStore& queries, const EncodedPool& pool,
                            const Relevance& relevance, std::span<const std::size_t> ks,
                            std::size_t threads = 1);

/// `media-id\t<key>:<sim> ...`, similarities with 6 decimals. `top` limits
/// the entries per line (0 = all).
std::string format_ranking_dump(std::span<const RankedList> rankings, std::size_t top = 0);
std::vector<RankedList> parse_ranking_dump(std::string_view text, const std::string& source = "rankings");

/// `media-id\tbest_rank\ttop10-keys` lines.
std::string format_per_query(std::span<const RankedList> rankings, const Relevance& relevance);

/// image_feature - sum r(w) over `subtract` + sum r(w) over `add`, each r(w)
/// the prediction for the one-word sentence w.
std::vector<float> compose_query(std::span<const float> image_feature,
                                 std::span<const std::string> add,
                                 std::span<const std::string> subtract, const W2VVModel& model);

struct Neighbor {
  std::string id;
  double similarity;
};

/// Nearest stored vectors by cosine; ties broken by ascending id.
std::vector<Neighbor> nearest(std::span<const float> query, const FeatureStore& store,
                              std::size_t top);

struct ClusterSeparation {
  static constexpr std::size_t kBins = 64;  // uniform over cosine distance [0, 2]
  std::array<std::uint64_t, kBins> intra{};
  std::array<std::uint64_t, kBins> inter{};
  double intra_mean = 0.0;
  double inter_mean = 0.0;
  std::uint64_t intra_pairs = 0;
  std::uint64_t inter_pairs = 0;
  bool inter_sampled = false;
};

/// Cosine-distance histograms between captions of the same medium (intra)
/// and of different media (inter). Inter pairs are enumerated exhaustively
/// when there are at most `max_inter_pairs`, otherwise that many pairs are
/// sampled with `seed`. Throws ProtocolError with fewer than two groups or
/// no group holding two captions.
ClusterSeparation cluster_separation(const EncodedPool& pool,
                                     std::uint64_t max_inter_pairs = 1'000'000,
                                     std::uint64_t seed = 42);

}  // namespace w2vv
