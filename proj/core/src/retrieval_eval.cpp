// SPDX-License-Identifier: Apache-2.0
#include "w2vv/retrieval_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numeric>
#include <unordered_map>

#include "w2vv/errors.hpp"
#include "w2vv/parallel.hpp"

namespace w2vv {
namespace {

double norm_of(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += double(x) * double(x);
  return std::sqrt(s);
}

double dot_of(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
  return s;
}

double cosine_from(double dot, double na, double nb) {
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (na * nb);
}

// Descending similarity, then ascending key order.
std::vector<std::uint32_t> sorted_order(std::span<const float> query, const EncodedPool& pool,
                                        std::vector<double>& sims) {
  if (query.size() != pool.dim())
    throw DimensionMismatchError("query has " + std::to_string(query.size()) +
                                 " components, pool rows have " + std::to_string(pool.dim()));
  const double qn = norm_of(query);
  sims.resize(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i)
    sims[i] = cosine_from(dot_of(query, pool.row(i)), qn, pool.norm(i));
  std::vector<std::uint32_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return pool.key_rank(a) < pool.key_rank(b);
  });
  return order;
}

std::string format_sim(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw ShapeError("cosine of vectors with " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " components");
  return cosine_from(dot_of(a, b), norm_of(a), norm_of(b));
}

EncodedPool::EncodedPool(std::vector<CaptionKey> keys, std::size_t dim, std::vector<float> rows,
                         std::string source_id)
    : keys_(std::move(keys)), dim_(dim), rows_(std::move(rows)), source_id_(std::move(source_id)) {
  if (rows_.size() != keys_.size() * dim_)
    throw ShapeError("pool matrix does not match its key count");
  norms_.resize(keys_.size());
  for (std::size_t i = 0; i < keys_.size(); ++i) norms_[i] = norm_of(row(i));
  std::vector<std::uint32_t> order(keys_.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return keys_[a] < keys_[b]; });
  key_rank_.resize(keys_.size());
  for (std::size_t r = 0; r < order.size(); ++r) key_rank_[order[r]] = static_cast<std::uint32_t>(r);
}

FeatureStore EncodedPool::to_feature_store() const {
  FeatureStore store(dim_);
  for (std::size_t i = 0; i < size(); ++i) store.add(keys_[i].str(), row(i));
  return store;
}

EncodedPool EncodedPool::from_feature_store(const FeatureStore& store, std::string source_id) {
  std::vector<CaptionKey> keys;
  keys.reserve(store.size());
  std::vector<float> rows;
  rows.reserve(store.size() * store.dim());
  for (std::size_t i = 0; i < store.size(); ++i) {
    keys.push_back(CaptionKey::parse(store.ids()[i]));
    const auto r = store.at(i);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return EncodedPool(std::move(keys), store.dim(), std::move(rows), std::move(source_id));
}

EncodedPool encode_pool(const W2VVModel& model, const CaptionSet& captions, std::size_t threads,
                        std::string source_id) {
  const std::size_t d = model.params.mlp.output_dim();
  std::vector<float> rows(captions.size() * d);
  parallel_for(captions.size(), threads, [&](std::size_t i) {
    const auto& rec = captions[i];
    std::vector<float> r;
    try {
      r = model.predict(rec.text);
    } catch (const Error& e) {
      throw Error(e.kind(), "caption " + rec.key.str() + ": " + e.what());
    }
    std::copy(r.begin(), r.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * d));
  });
  std::vector<CaptionKey> keys;
  keys.reserve(captions.size());
  for (const auto& rec : captions.records()) keys.push_back(rec.key);
  return EncodedPool(std::move(keys), d, std::move(rows), std::move(source_id));
}

RankedList rank_captions(std::string_view query_id, std::span<const float> query,
                         const EncodedPool& pool) {
  std::vector<double> sims;
  const auto order = sorted_order(query, pool, sims);
  RankedList out;
  out.query_id = std::string(query_id);
  out.keys.reserve(order.size());
  out.similarities.reserve(order.size());
  for (auto i : order) {
    out.keys.push_back(pool.keys()[i]);
    out.similarities.push_back(sims[i]);
  }
  return out;
}

std::vector<RankedList> rank_all(const FeatureStore& queries, const EncodedPool& pool,
                                 std::size_t threads) {
  std::vector<RankedList> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t q) {
    out[q] = rank_captions(queries.ids()[q], queries.at(q), pool);
  });
  return out;
}

Relevance build_relevance(std::span<const CaptionKey> keys, RelevanceConvention convention) {
  Relevance rel;
  for (const auto& k : keys) rel[k.media_id].insert(k);
  if (convention == RelevanceConvention::kSingleAnnotated) {
    std::string bad;
    for (const auto& [id, set] : rel)
      if (set.size() != 1) bad += (bad.empty() ? "" : ", ") + id;
    if (!bad.empty())
      throw ProtocolError("single-annotated relevance needs exactly one caption per medium: " + bad);
  }
  return rel;
}

std::size_t best_relevant_rank(const RankedList& ranking, const Relevance& relevance) {
  auto it = relevance.find(ranking.query_id);
  if (it != relevance.end())
    for (std::size_t i = 0; i < ranking.keys.size(); ++i)
      if (it->second.contains(ranking.keys[i])) return i + 1;
  throw ProtocolError("query '" + ranking.query_id + "' has no relevant caption in the pool");
}

std::vector<std::size_t> best_ranks(std::span<const RankedList> rankings, const Relevance& relevance) {
  std::vector<std::size_t> ranks;
  ranks.reserve(rankings.size());
  std::string missing;
  for (const auto& r : rankings) {
    try {
      ranks.push_back(best_relevant_rank(r, relevance));
    } catch (const ProtocolError&) {
      missing += (missing.empty() ? "" : ", ") + r.query_id;
    }
  }
  if (!missing.empty()) throw ProtocolError("queries without a relevant caption: " + missing);
  return ranks;
}

std::vector<std::pair<std::size_t, double>> recall_from_ranks(std::span<const std::size_t> ranks,
                                                              std::span<const std::size_t> ks) {
  if (ranks.empty()) throw ProtocolError("no queries to evaluate");
  std::vector<std::pair<std::size_t, double>> out;
  for (auto k : ks) {
    if (k == 0) throw ConfigError("recall cutoff K must be >= 1");
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
    out.emplace_back(k, 100.0 * double(hits) / double(ranks.size()));
  }
  return out;
}

double mir_from_ranks(std::span<const std::size_t> ranks) {
  if (ranks.empty()) throw ProtocolError("no queries to evaluate");
  double s = 0.0;
  for (auto r : ranks) s += 1.0 / double(r);
  return s / double(ranks.size());
}

std::vector<std::pair<std::size_t, double>> recall_at_k(std::span<const RankedList> rankings,
                                                        const Relevance& relevance,
                                                        std::span<const std::size_t> ks) {
  return recall_from_ranks(best_ranks(rankings, relevance), ks);
}

double mean_inverted_rank(std::span<const RankedList> rankings, const Relevance& relevance) {
  return mir_from_ranks(best_ranks(rankings, relevance));
}

double MetricsReport::recall_at(std::size_t k) const {
  for (const auto& [kk, v] : recall)
    if (kk == k) return v;
  throw ConfigError("R@" + std::to_string(k) + " was not computed");
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : recall) j["r" + std::to_string(k)] = v;
  j["mir"] = mir;
  j["queries"] = queries;
  return j.dump();
}

MetricsReport evaluate(std::span<const RankedList> rankings, const Relevance& relevance,
                       std::span<const std::size_t> ks) {
  const auto ranks = best_ranks(rankings, relevance);
  return {recall_from_ranks(ranks, ks), mir_from_ranks(ranks), ranks.size()};
}

MetricsReport evaluate_pool(const FeatureStore& queries, const EncodedPool& pool,
                            const Relevance& relevance, std::span<const std::size_t> ks,
                            std::size_t threads) {
  std::vector<std::size_t> ranks(queries.size(), 0);
  parallel_for(queries.size(), threads, [&](std::size_t q) {
    std::vector<double> sims;
    const auto order = sorted_order(queries.at(q), pool, sims);
    auto it = relevance.find(queries.ids()[q]);
    if (it == relevance.end()) return;
    for (std::size_t i = 0; i < order.size(); ++i)
      if (it->second.contains(pool.keys()[order[i]])) {
        ranks[q] = i + 1;
        return;
      }
  });
  std::string missing;
  for (std::size_t q = 0; q < ranks.size(); ++q)
    if (ranks[q] == 0) missing += (missing.empty() ? "" : ", ") + queries.ids()[q];
  if (!missing.empty()) throw ProtocolError("queries without a relevant caption: " + missing);
  return {recall_from_ranks(ranks, ks), mir_from_ranks(ranks), ranks.size()};
}

std::string format_ranking_dump(std::span<const RankedList> rankings, std::size_t top) {
  std::string out;
  for (const auto& r : rankings) {
    out += r.query_id;
    out += '\t';
    const std::size_t n = top == 0 ? r.keys.size() : std::min(top, r.keys.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += r.keys[i].str();
      out += ':';
      out += format_sim(r.similarities[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<RankedList> parse_ranking_dump(std::string_view text, const std::string& source) {
  std::vector<RankedList> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw ParseError(source, line_no, "expected '<media-id>\\t<key>:<sim> ...'");
    RankedList r;
    r.query_id = std::string(line.substr(0, tab));
    auto rest = line.substr(tab + 1);
    std::size_t i = 0;
    while (i < rest.size()) {
      while (i < rest.size() && rest[i] == ' ') ++i;
      if (i >= rest.size()) break;
      auto j = rest.find(' ', i);
      if (j == std::string_view::npos) j = rest.size();
      const auto entry = rest.substr(i, j - i);
      i = j;
      const auto colon = entry.rfind(':');
      if (colon == std::string_view::npos)
        throw ParseError(source, line_no, "entry '" + std::string(entry) + "' lacks ':<sim>'");
      double sim = 0.0;
      const auto num = entry.substr(colon + 1);
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), sim);
      if (ec != std::errc() || ptr != num.data() + num.size())
        throw ParseError(source, line_no, "bad similarity in '" + std::string(entry) + "'");
      try {
        r.keys.push_back(CaptionKey::parse(entry.substr(0, colon)));
      } catch (const ValueError& e) {
        throw ParseError(source, line_no, e.what());
      }
      r.similarities.push_back(sim);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_per_query(std::span<const RankedList> rankings, const Relevance& relevance) {
  const auto ranks = best_ranks(rankings, relevance);
  std::string out;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& r = rankings[q];
    out += r.query_id;
    out += '\t';
    out += std::to_string(ranks[q]);
    out += '\t';
    for (std::size_t i = 0; i < std::min<std::size_t>(10, r.keys.size()); ++i) {
      if (i) out += ' ';
      out += r.keys[i].str();
    }
    out += '\n';
  }
  return out;
}

std::vector<float> compose_query(std::span<const float> image_feature,
                                 std::span<const std::string> add,
                                 std::span<const std::string> subtract, const W2VVModel& model) {
  const auto d = model.params.mlp.output_dim();
  if (image_feature.size() != d)
    throw DimensionMismatchError("image feature has " + std::to_string(image_feature.size()) +
                                 " components, model predicts " + std::to_string(d));
  std::vector<double> acc(image_feature.begin(), image_feature.end());
  for (const auto& w : subtract) {
    const auto r = model.predict(w);
    for (std::size_t j = 0; j < d; ++j) acc[j] -= r[j];
  }
  for (const auto& w : add) {
    const auto r = model.predict(w);
    for (std::size_t j = 0; j < d; ++j) acc[j] += r[j];
  }
  return std::vector<float>(acc.begin(), acc.end());
}

std::vector<Neighbor> nearest(std::span<const float> query, const FeatureStore& store,
                              std::size_t top) {
  if (query.size() != store.dim())
    throw DimensionMismatchError("query has " + std::to_string(query.size()) +
                                 " components, store has " + std::to_string(store.dim()));
  std::vector<Neighbor> all;
  all.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i)
    all.push_back({store.ids()[i], cosine(query, store.at(i))});
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  if (top > 0 && all.size() > top) all.resize(top);
  return all;
}

ClusterSeparation cluster_separation(const EncodedPool& pool, std::uint64_t max_inter_pairs,
                                     std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pool.size(); ++i) groups[pool.keys()[i].media_id].push_back(i);
  if (groups.size() < 2) throw ProtocolError("cluster separation needs at least two media");
  if (std::none_of(groups.begin(), groups.end(), [](const auto& g) { return g.second.size() >= 2; }))
    throw ProtocolError("cluster separation needs a medium with at least two captions");

  ClusterSeparation out;
  auto distance = [&](std::size_t a, std::size_t b) {
    return 1.0 - cosine_from(dot_of(pool.row(a), pool.row(b)), pool.norm(a), pool.norm(b));
  };
  auto bin = [](double d) {
    d = std::clamp(d, 0.0, 2.0);
    return std::min<std::size_t>(ClusterSeparation::kBins - 1,
                                 static_cast<std::size_t>(d / 2.0 * ClusterSeparation::kBins));
  };

  double intra_sum = 0.0;
  for (const auto& [id, members] : groups)
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const double d = distance(members[a], members[b]);
        ++out.intra[bin(d)];
        intra_sum += d;
        ++out.intra_pairs;
      }

  std::vector<std::size_t> group_of(pool.size());
  {
    std::size_t g = 0;
    for (const auto& [id, members] : groups) {
      for (auto m : members) group_of[m] = g;
      ++g;
    }
  }
  std::uint64_t total_inter = 0;
  {
    const std::uint64_t n = pool.size();
    std::uint64_t same = 0;
    for (const auto& [id, members] : groups) same += std::uint64_t(members.size()) * (members.size() - 1) / 2;
    total_inter = n * (n - 1) / 2 - same;
  }

  double inter_sum = 0.0;
  if (total_inter <= max_inter_pairs) {
    for (std::size_t a = 0; a < pool.size(); ++a)
      for (std::size_t b = a + 1; b < pool.size(); ++b) {
        if (group_of[a] == group_of[b]) continue;
        const double d = distance(a, b);
        ++out.inter[bin(d)];
        inter_sum += d;
        ++out.inter_pairs;
      }
  } else {
    out.inter_sampled = true;
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    while (out.inter_pairs < max_inter_pairs) {
      const auto a = pick(rng), b = pick(rng);
      if (group_of[a] == group_of[b]) continue;
      const double d = distance(a, b);
      ++out.inter[bin(d)];
      inter_sum += d;
      ++out.inter_pairs;
    }
  }
  out.intra_mean = intra_sum / double(out.intra_pairs);
  out.inter_mean = out.inter_pairs ? inter_sum / double(out.inter_pairs) : 0.0;
  return out;
}

}  // namespace w2vv
