// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "w2vv/checkpoint.hpp"
#include "w2vv/data_io.hpp"
#include "w2vv/errors.hpp"
#include "w2vv/retrieval_eval.hpp"
#include "w2vv/run_config.hpp"
#include "w2vv/training.hpp"

namespace w2vv::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultGradcheckSeed = 7;
constexpr double kGradcheckPassThreshold = 1e-3;
constexpr std::size_t kSampledCoordsPerTensor = 20;

struct Options {
  std::string config, checkpoint, captions, features, embeddings, out;
  std::string pool, rankings, query, per_query;
  std::string relevance = "shared-media";
  std::size_t threads = 1;
  std::size_t top = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> add, sub;
  std::vector<std::size_t> ks{1, 5, 10};
  double eps = 1e-4;
  std::optional<std::size_t> max_coords;
};

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw DatasetError(std::string(flag) + ": no such file: " + path);
}

void require_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_directory(path)) throw DatasetError(std::string(flag) + ": no such directory: " + path);
}

/// Output files must land in an existing directory and not clobber one.
void check_output_file(const std::string& path, const char* flag) {
  if (path.empty()) return;
  const fs::path p(path);
  if (fs::is_directory(p)) throw ConfigError(std::string(flag) + " names a directory: " + path);
  const auto parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(parent))
    throw ConfigError(std::string(flag) + ": parent directory does not exist: " + parent.string());
}

void check_output_dir(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (fs::exists(path) && !fs::is_directory(path))
    throw ConfigError(std::string(flag) + " exists and is not a directory: " + path);
}

RelevanceConvention parse_relevance(const std::string& s) {
  if (s == "shared-media") return RelevanceConvention::kSharedMedia;
  if (s == "single-annotated") return RelevanceConvention::kSingleAnnotated;
  throw ConfigError("--relevance must be shared-media or single-annotated");
}

std::unordered_set<std::string> caption_words(const CaptionSet& captions) {
  std::unordered_set<std::string> words;
  for (const auto& rec : captions.records())
    for (auto& t : tokenize(rec.text).tokens) words.insert(std::move(t));
  return words;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_file(path, text);
}

// Resolves relative dataset paths against the config file's directory.
RunConfig load_config_for_cli(const Options& o) {
  require_file(o.config, "--config");
  auto c = load_run_config(o.config);
  const auto base = fs::absolute(o.config).parent_path();
  for (auto* p : {&c.train_captions, &c.train_features, &c.val_captions, &c.val_features,
                  &c.embeddings, &c.output_dir})
    if (!p->empty() && fs::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  if (!o.out.empty()) c.output_dir = o.out;
  if (!o.embeddings.empty()) c.embeddings = fs::absolute(o.embeddings).lexically_normal().string();
  if (o.seed) c.seed = *o.seed;
  c.threads = o.threads;
  c.validate();
  return c;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const auto c = load_config_for_cli(o);
  c.validate_paths();
  require_file(c.train_captions, "train_captions");
  require_file(c.train_features, "train_features");
  require_file(c.val_captions, "val_captions");
  require_file(c.val_features, "val_features");
  if (!c.embeddings.empty()) require_file(c.embeddings, "embeddings");
  check_output_dir(c.output_dir, "--out");

  const auto train_caps = load_captions(c.train_captions);
  const auto train_feats = load_feature_store(c.train_features);
  const auto val_caps = load_captions(c.val_captions);
  const auto val_feats = load_feature_store(c.val_features);
  std::shared_ptr<const EmbeddingTable> table;
  if (!c.embeddings.empty()) {
    auto words = caption_words(train_caps);
    words.merge(caption_words(val_caps));
    table = std::make_shared<EmbeddingTable>(load_embedding_table(c.embeddings, &words));
  }

  std::string log;
  const auto res = fit(c, train_caps, train_feats, val_caps, val_feats, table, {},
                       [&](const EpochRecord& r, const FitResult&) {
                         const auto line = format_epoch_log(r);
                         log += line + "\n";
                         err << "epoch " << line << "\n";
                       });

  fs::create_directories(c.output_dir);
  save_checkpoint(c.output_dir, res.model.params, res.model.encoder.vocabulary(), c);
  write_file(fs::path(c.output_dir) / "train.log", log);
  out << "best_epoch=" << res.best_epoch << " best_"
      << validation_metric_name(c.validation_metric) << "=" << fmt("%.6f", res.best_score)
      << " epochs=" << res.history.size() << "\n";
  return kOk;
}

W2VVModel model_for(const Options& o, const CaptionSet& captions) {
  if (!o.embeddings.empty()) require_file(o.embeddings, "--embeddings");
  const auto words = caption_words(captions);
  return load_model(o.checkpoint, o.embeddings, &words);
}

int cmd_encode(const Options& o, std::ostream& out, std::ostream&) {
  require_dir(o.checkpoint, "--checkpoint");
  require_file(o.captions, "--captions");
  if (o.out.empty()) throw ConfigError("--out is required");
  check_output_file(o.out, "--out");

  const auto captions = load_captions(o.captions);
  const auto model = model_for(o, captions);
  const auto pool = encode_pool(model, captions, o.threads, o.checkpoint);
  save_feature_store(o.out, pool.to_feature_store(), FeatureFormat::kBinary);
  out << "encoded=" << pool.size() << " dim=" << pool.dim() << "\n";
  return kOk;
}

// Pool from --pool, or from --checkpoint + --captions.
void check_pool_source(const Options& o) {
  if (!o.pool.empty()) {
    if (!o.checkpoint.empty()) throw ConfigError("give either --pool or --checkpoint, not both");
    require_file(o.pool, "--pool");
  } else {
    if (o.checkpoint.empty()) throw ConfigError("--pool or --checkpoint with --captions is required");
    require_dir(o.checkpoint, "--checkpoint");
    require_file(o.captions, "--captions");
  }
}

EncodedPool obtain_pool(const Options& o) {
  if (!o.pool.empty()) return EncodedPool::from_feature_store(load_feature_store(o.pool), o.pool);
  const auto captions = load_captions(o.captions);
  return encode_pool(model_for(o, captions), captions, o.threads, o.checkpoint);
}

int cmd_rank(const Options& o, std::ostream& out, std::ostream&) {
  check_pool_source(o);
  require_file(o.features, "--features");
  check_output_file(o.out, "--out");

  const auto queries = load_feature_store(o.features);
  const auto pool = obtain_pool(o);
  const auto rankings = rank_all(queries, pool, o.threads);
  emit(format_ranking_dump(rankings, o.top), o.out, out);
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
  const auto convention = parse_relevance(o.relevance);
  if (o.ks.empty()) throw ConfigError("--k needs at least one cutoff");
  for (auto k : o.ks)
    if (k == 0) throw ConfigError("--k cutoffs must be positive");
  const bool from_dump = !o.rankings.empty();
  if (from_dump) {
    if (!o.pool.empty() || !o.checkpoint.empty())
      throw ConfigError("give either --rankings or a pool source, not both");
    require_file(o.rankings, "--rankings");
    if (!o.captions.empty()) require_file(o.captions, "--captions");
  } else {
    check_pool_source(o);
    require_file(o.features, "--features");
  }
  check_output_file(o.out, "--out");
  check_output_file(o.per_query, "--per-query");

  MetricsReport report;
  std::vector<RankedList> rankings;
  Relevance relevance;
  if (from_dump) {
    rankings = parse_ranking_dump(read_file(o.rankings), o.rankings);
    std::vector<CaptionKey> keys;
    if (!o.captions.empty()) {
      for (const auto& rec : load_captions(o.captions).records()) keys.push_back(rec.key);
    } else {
      std::set<CaptionKey> seen;
      for (const auto& r : rankings) seen.insert(r.keys.begin(), r.keys.end());
      keys.assign(seen.begin(), seen.end());
    }
    relevance = build_relevance(keys, convention);
    report = evaluate(rankings, relevance, o.ks);
  } else {
    const auto queries = load_feature_store(o.features);
    const auto pool = obtain_pool(o);
    relevance = build_relevance(pool.keys(), convention);
    report = evaluate_pool(queries, pool, relevance, o.ks, o.threads);
    if (!o.per_query.empty()) rankings = rank_all(queries, pool, o.threads);
  }

  const auto json = report.to_json() + "\n";
  out << json;
  if (!o.out.empty()) write_file(o.out, json);
  if (!o.per_query.empty()) write_file(o.per_query, format_per_query(rankings, relevance));

  std::string summary;
  for (const auto& [k, v] : report.recall) summary += "r" + std::to_string(k) + "=" + fmt("%.1f", v) + " ";
  err << summary << "mir=" << fmt("%.6f", report.mir) << " queries=" << report.queries << "\n";
  return kOk;
}

int cmd_compose(const Options& o, std::ostream& out, std::ostream&) {
  require_dir(o.checkpoint, "--checkpoint");
  require_file(o.features, "--features");
  if (o.query.empty()) throw ConfigError("--query is required");
  if (!o.embeddings.empty()) require_file(o.embeddings, "--embeddings");
  check_output_file(o.out, "--out");

  const auto images = load_feature_store(o.features);
  std::unordered_set<std::string> words;
  for (const auto& list : {o.add, o.sub})
    for (const auto& w : list)
      for (auto& t : tokenize(w).tokens) words.insert(std::move(t));
  const auto model = load_model(o.checkpoint, o.embeddings, &words);
  const auto q = compose_query(images.get(o.query), o.add, o.sub, model);
  const auto hits = nearest(q, images, o.top == 0 ? 10 : o.top);

  std::ostringstream text;
  for (std::size_t i = 0; i < hits.size(); ++i)
    text << i + 1 << "\t" << hits[i].id << "\t" << fmt("%.6f", hits[i].similarity) << "\n";
  emit(text.str(), o.out, out);
  return kOk;
}

// A caption picked by `seed` from `captions`, paired with its feature.
void sample_pair(const TextEncoder& enc, const CaptionSet& captions, const FeatureStore& features,
                 std::uint64_t seed, CaptionInputs& inputs, std::vector<double>& target) {
  if (captions.empty()) throw DatasetError("no captions to sample a gradient-check pair from");
  const auto& rec = captions[Rng(seed)() % captions.size()];
  inputs = enc.encode(rec.text);
  const auto f = features.get(rec.key.media_id);
  target.assign(f.begin(), f.end());
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream&) {
  const std::uint64_t seed = o.seed.value_or(kDefaultGradcheckSeed);
  W2VVParams<double> params;
  CaptionInputs inputs;
  std::vector<double> target;
  std::size_t max_coords = o.max_coords.value_or(0);

  if (o.config.empty() && o.checkpoint.empty()) {
    auto c = make_gradcheck_case(seed);
    params = std::move(c.params);
    inputs = std::move(c.inputs);
    target = std::move(c.target);
  } else {
    std::optional<RunConfig> cfg;
    if (!o.config.empty()) cfg = load_config_for_cli(o);
    std::string caps = o.captions, feats = o.features;
    if (caps.empty() && cfg) caps = cfg->train_captions;
    if (feats.empty() && cfg) feats = cfg->train_features;
    require_file(caps, "--captions");
    require_file(feats, "--features");
    if (!o.checkpoint.empty()) require_dir(o.checkpoint, "--checkpoint");
    if (!o.max_coords) max_coords = kSampledCoordsPerTensor;

    const auto captions = load_captions(caps);
    const auto features = load_feature_store(feats);
    if (!o.checkpoint.empty()) {
      const auto model = model_for(o, captions);
      sample_pair(model.encoder, captions, features, seed, inputs, target);
      params = model.params.cast<double>();
    } else {
      const auto& c = *cfg;
      const auto words = caption_words(captions);
      std::shared_ptr<const EmbeddingTable> table;
      if (!c.embeddings.empty())
        table = std::make_shared<EmbeddingTable>(load_embedding_table(c.embeddings, &words));
      const auto& v = c.vectorizers;
      Vocabulary vocab;
      if (v.bow || v.gru) vocab = build_vocabulary(captions, c.min_count);
      TextEncoder enc(v, vocab, v.mean_embedding ? table : nullptr, c.gru_hidden);
      const auto shape = c.model_shape(vocab.size(), table ? table->dim() : 0, features.dim());
      params = init_params(shape, vocab, table.get(), c.seed).cast<double>();
      sample_pair(enc, captions, features, seed, inputs, target);
    }
  }

  const auto rep = grad_check(params, inputs, target, o.eps, max_coords, seed);
  out << "max_relative_error=" << fmt("%.3e", rep.max_relative_error)
      << " worst=" << (rep.worst_tensor.empty() ? "-" : rep.worst_tensor)
      << " checked=" << rep.coordinates_checked << "/" << rep.coordinates_total << "\n";
  return rep.max_relative_error < kGradcheckPassThreshold ? kOk : kNumeric;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return kUsage;
    case ErrorKind::kNumeric: return kNumeric;
    case ErrorKind::kData: break;
  }
  return kData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Caption-to-visual-feature training and retrieval", "w2vv"};
  app.require_subcommand(1);
  Options o;

  auto add_threads = [&](CLI::App* s) {
    s->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto add_pool_source = [&](CLI::App* s) {
    s->add_option("--checkpoint", o.checkpoint, "Checkpoint directory");
    s->add_option("--captions", o.captions, "Caption file");
    s->add_option("--pool", o.pool, "Encoded pool file");
    s->add_option("--embeddings", o.embeddings, "Pretrained embedding file");
  };

  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--config", o.config, "Run configuration (JSON)")->required();
  train->add_option("--out", o.out, "Checkpoint directory (overrides output_dir)");
  train->add_option("--embeddings", o.embeddings, "Pretrained embedding file");
  train->add_option("--seed", o.seed, "Random seed");
  add_threads(train);

  auto* encode = app.add_subcommand("encode", "Encode captions into the visual space");
  encode->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  encode->add_option("--captions", o.captions, "Caption file")->required();
  encode->add_option("--embeddings", o.embeddings, "Pretrained embedding file");
  encode->add_option("--out", o.out, "Encoded pool file")->required();
  add_threads(encode);

  auto* rank = app.add_subcommand("rank", "Rank a caption pool for every query feature");
  add_pool_source(rank);
  rank->add_option("--features", o.features, "Query feature file")->required();
  rank->add_option("--out", o.out, "Ranking dump (default: stdout)");
  rank->add_option("--top", o.top, "Entries per query (0 = all)");
  add_threads(rank);

  auto* eval = app.add_subcommand("eval", "Compute R@K and mean inverted rank");
  add_pool_source(eval);
  eval->add_option("--rankings", o.rankings, "Ranking dump");
  eval->add_option("--features", o.features, "Query feature file");
  eval->add_option("--relevance", o.relevance, "shared-media or single-annotated")
      ->check(CLI::IsMember({"shared-media", "single-annotated"}));
  eval->add_option("--k", o.ks, "Recall cutoffs")->delimiter(',');
  eval->add_option("--out", o.out, "Metrics JSON file");
  eval->add_option("--per-query", o.per_query, "Per-query best ranks file");
  add_threads(eval);

  auto* compose = app.add_subcommand("compose", "Edit an image query with words");
  compose->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  compose->add_option("--features", o.features, "Image feature file")->required();
  compose->add_option("--query", o.query, "Query image id")->required();
  compose->add_option("--add", o.add, "Words to add")->delimiter(',');
  compose->add_option("--sub", o.sub, "Words to subtract")->delimiter(',');
  compose->add_option("--embeddings", o.embeddings, "Pretrained embedding file");
  compose->add_option("--top", o.top, "Neighbors to list (default 10)");
  compose->add_option("--out", o.out, "Output file (default: stdout)");

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  gradcheck->add_option("--config", o.config, "Run configuration (default: built-in tiny model)");
  gradcheck->add_option("--checkpoint", o.checkpoint, "Check a trained checkpoint");
  gradcheck->add_option("--captions", o.captions, "Caption file for the sample pair");
  gradcheck->add_option("--features", o.features, "Feature file for the sample pair");
  gradcheck->add_option("--embeddings", o.embeddings, "Pretrained embedding file");
  gradcheck->add_option("--seed", o.seed, "Seed for the model and sample pair");
  gradcheck->add_option("--eps", o.eps, "Finite-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--max-coords", o.max_coords, "Coordinates sampled per tensor (0 = all)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(o, out, err);
    if (*encode) return cmd_encode(o, out, err);
    if (*rank) return cmd_rank(o, out, err);
    if (*eval) return cmd_eval(o, out, err);
    if (*compose) return cmd_compose(o, out, err);
    if (*gradcheck) return cmd_gradcheck(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace w2vv::cli
