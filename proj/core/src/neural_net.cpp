// SPDX-License-Identifier: Apache-2.0
#include "w2vv/neural_net.hpp"

#include <cmath>
#include <string>

#include "w2vv/errors.hpp"

namespace w2vv {
namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

template <typename T>
void require_finite(std::span<const T> v, const char* what) {
  for (T x : v)
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in GRU ") + what);
}

template <typename T>
void expect_shape(const Tensor<T>& t, std::size_t rows, std::size_t cols, const std::string& name) {
  if (t.rows() != rows || t.cols() != cols)
    throw ShapeError(name + " is " + shape_string(t) + ", expected " + std::to_string(rows) +
                     "x" + std::to_string(cols));
}

// W_in x + W_rec h + b, accumulated in double.
template <typename T>
void gate_preactivation(const Tensor<T>& w_in, std::span<const T> x, const Tensor<T>& w_rec,
                        std::span<const T> h, const Tensor<T>& b, std::vector<double>& out) {
  out.assign(b.rows(), 0.0);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = double(b[r]) + dot(w_in.row(r).data(), x.data(), x.size()) +
             dot(w_rec.row(r).data(), h.data(), h.size());
  }
}

template <typename T>
std::vector<const Tensor<T>*> tensor_list(const W2VVParams<T>& p) {
  std::vector<const Tensor<T>*> out;
  p.for_each_tensor([&](const std::string&, const Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <typename T>
std::vector<Tensor<T>*> tensor_list(W2VVParams<T>& p) {
  std::vector<Tensor<T>*> out;
  p.for_each_tensor([&](const std::string&, Tensor<T>& t) { out.push_back(&t); });
  return out;
}

template <typename P, typename Fn>
void visit_tensors(P& p, Fn&& fn) {
  if (p.gru) {
    auto& g = *p.gru;
    fn("gru.embedding", g.embedding);
    fn("gru.update.input", g.update_input);
    fn("gru.update.recurrent", g.update_recurrent);
    fn("gru.update.bias", g.update_bias);
    fn("gru.reset.input", g.reset_input);
    fn("gru.reset.recurrent", g.reset_recurrent);
    fn("gru.reset.bias", g.reset_bias);
    fn("gru.candidate.input", g.candidate_input);
    fn("gru.candidate.recurrent", g.candidate_recurrent);
    fn("gru.candidate.bias", g.candidate_bias);
  }
  for (std::size_t i = 0; i < p.mlp.layers.size(); ++i) {
    auto& l = p.mlp.layers[i];
    fn("mlp." + std::to_string(i) + ".weight", l.weight);
    fn("mlp." + std::to_string(i) + ".bias", l.bias);
  }
}

}  // namespace

template <typename T>
void W2VVParams<T>::for_each_tensor(
    const std::function<void(const std::string&, Tensor<T>&)>& fn) {
  visit_tensors(*this, fn);
}

template <typename T>
void W2VVParams<T>::for_each_tensor(
    const std::function<void(const std::string&, const Tensor<T>&)>& fn) const {
  visit_tensors(*this, fn);
}

template <typename T>
std::size_t W2VVParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
std::vector<std::size_t> W2VVParams<T>::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (mlp.layers.empty()) return sizes;
  sizes.push_back(mlp.input_dim());
  for (const auto& l : mlp.layers) sizes.push_back(l.weight.rows());
  return sizes;
}

template <typename T>
void W2VVParams<T>::validate() const {
  if (mlp.layers.empty()) throw ShapeError("model has no MLP layers");
  if (layout.total() != mlp.input_dim())
    throw ShapeError("sentence layout totals " + std::to_string(layout.total()) +
                     " but the first layer takes " + std::to_string(mlp.input_dim()));
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const auto& l = mlp.layers[i];
    const auto name = "mlp." + std::to_string(i);
    expect_shape(l.bias, l.weight.rows(), 1, name + ".bias");
    if (i > 0 && l.weight.cols() != mlp.layers[i - 1].weight.rows())
      throw ShapeError(name + ".weight does not chain with the previous layer");
  }
  const Segment* gseg = layout.find(SegmentKind::kGru);
  if (bool(gseg) != gru.has_value())
    throw ShapeError("GRU parameters present/absent inconsistently with the layout");
  if (gru) {
    const auto h = gseg->length;
    const auto e = gru->embedding.cols();
    if (e == 0 || gru->embedding.rows() == 0) throw ShapeError("empty GRU embedding table");
    for (auto* w : {&gru->update_input, &gru->reset_input, &gru->candidate_input})
      expect_shape(*w, h, e, "gru input weight");
    for (auto* w : {&gru->update_recurrent, &gru->reset_recurrent, &gru->candidate_recurrent})
      expect_shape(*w, h, h, "gru recurrent weight");
    for (auto* b : {&gru->update_bias, &gru->reset_bias, &gru->candidate_bias})
      expect_shape(*b, h, 1, "gru bias");
  }
}

template <typename T>
template <typename U>
W2VVParams<U> W2VVParams<T>::cast() const {
  W2VVParams<U> out;
  out.layout = layout;
  out.output_activation = output_activation;
  if (gru) out.gru.emplace();
  out.mlp.layers.resize(mlp.layers.size());
  auto src = tensor_list(*this);
  auto dst = tensor_list(out);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
  return out;
}

template <typename T>
GradSet<T> GradSet<T>::zeros_like(const W2VVParams<T>& params) {
  GradSet g{params};
  g.set_zero();
  return g;
}

template <typename T>
void GradSet<T>::set_zero() {
  values.for_each_tensor([](const std::string&, Tensor<T>& t) { t.set_zero(); });
}

template <typename T>
void GradSet<T>::add(const GradSet& other) {
  auto dst = tensor_list(values);
  auto src = tensor_list(other.values);
  if (dst.size() != src.size()) throw ShapeError("gradient sets differ in tensor count");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (!dst[i]->same_shape(*src[i])) throw ShapeError("gradient tensor shape mismatch");
    auto d = dst[i]->flat();
    auto s = src[i]->flat();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += s[j];
  }
}

template <typename T>
void GradSet<T>::scale(double factor) {
  values.for_each_tensor([&](const std::string&, Tensor<T>& t) {
    for (auto& v : t.flat()) v = static_cast<T>(double(v) * factor);
  });
}

SegmentLayout ModelShape::layout() const {
  std::vector<std::pair<SegmentKind, std::size_t>> parts;
  if (vectorizers.bow) parts.emplace_back(SegmentKind::kBow, vocab_size);
  if (vectorizers.mean_embedding) parts.emplace_back(SegmentKind::kMeanEmbedding, mean_embedding_dim);
  if (vectorizers.gru) parts.emplace_back(SegmentKind::kGru, gru_hidden);
  return SegmentLayout(parts);
}

W2VVParams<float> init_params(const ModelShape& shape, const Vocabulary& vocab,
                              const EmbeddingTable* pretrained, std::uint64_t seed) {
  if (!shape.vectorizers.any()) throw ConfigError("no vectorizer selected");
  if (shape.output_dim == 0) throw ConfigError("output dimension must be positive");
  Rng rng(seed);
  auto fill_uniform = [&](Tensor<float>& t, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.flat()) v = static_cast<float>(dist(rng));
  };
  auto glorot = [&](Tensor<float>& t) {
    fill_uniform(t, std::sqrt(6.0 / double(t.rows() + t.cols())));
  };

  W2VVParams<float> p;
  p.layout = shape.layout();
  p.output_activation = shape.output_activation;

  if (shape.vectorizers.gru) {
    const auto e = shape.embedding_dim;
    const auto h = shape.gru_hidden;
    if (e == 0 || h == 0) throw ConfigError("GRU sizes must be positive");
    if (vocab.size() != shape.vocab_size)
      throw ConfigError("vocabulary size disagrees with the model shape");
    if (pretrained && pretrained->dim() != e)
      throw ConfigError("pretrained embeddings are " + std::to_string(pretrained->dim()) +
                        "-dim but the GRU expects " + std::to_string(e));
    auto& g = p.gru.emplace();
    g.embedding = Tensor<float>(shape.vocab_size, e);
    constexpr double kFallbackRange = 0.1;
    std::uniform_real_distribution<double> fallback(-kFallbackRange, kFallbackRange);
    for (std::size_t w = 0; w < shape.vocab_size; ++w) {
      auto row = g.embedding.row(w);
      const auto src = pretrained ? pretrained->find(vocab.words()[w]) : std::span<const float>{};
      if (!src.empty()) {
        std::copy(src.begin(), src.end(), row.begin());
      } else {
        for (auto& v : row) v = static_cast<float>(fallback(rng));
      }
    }
    auto gate = [&](Tensor<float>& in, Tensor<float>& rec, Tensor<float>& bias) {
      in = Tensor<float>(h, e);
      rec = Tensor<float>(h, h);
      bias = Tensor<float>(h, 1);
      glorot(in);
      glorot(rec);
    };
    gate(g.update_input, g.update_recurrent, g.update_bias);
    gate(g.reset_input, g.reset_recurrent, g.reset_bias);
    gate(g.candidate_input, g.candidate_recurrent, g.candidate_bias);
  }

  std::size_t in = p.layout.total();
  std::vector<std::size_t> outs = shape.hidden_layers;
  outs.push_back(shape.output_dim);
  for (std::size_t out : outs) {
    if (out == 0) throw ConfigError("layer sizes must be positive");
    DenseLayer<float> l{Tensor<float>(out, in), Tensor<float>(out, 1)};
    glorot(l.weight);
    p.mlp.layers.push_back(std::move(l));
    in = out;
  }
  p.validate();
  return p;
}

template <typename T>
std::vector<T> gru_step(const GRUParams<T>& p, std::span<const T> input,
                        std::span<const T> h_prev, GruStepCache<T>* cache) {
  const auto h = p.hidden();
  if (input.size() != p.input_dim() || h_prev.size() != h)
    throw ShapeError("gru_step input/state size mismatch");

  std::vector<double> pre;
  std::vector<T> z(h), r(h), cand(h), out(h);

  gate_preactivation(p.update_input, input, p.update_recurrent, h_prev, p.update_bias, pre);
  for (std::size_t i = 0; i < h; ++i) z[i] = static_cast<T>(sigmoid(pre[i]));
  require_finite<T>(z, "update gate");

  gate_preactivation(p.reset_input, input, p.reset_recurrent, h_prev, p.reset_bias, pre);
  for (std::size_t i = 0; i < h; ++i) r[i] = static_cast<T>(sigmoid(pre[i]));
  require_finite<T>(r, "reset gate");

  std::vector<T> gated(h);
  for (std::size_t i = 0; i < h; ++i) gated[i] = r[i] * h_prev[i];
  gate_preactivation(p.candidate_input, input, p.candidate_recurrent,
                     std::span<const T>(gated), p.candidate_bias, pre);
  for (std::size_t i = 0; i < h; ++i) cand[i] = static_cast<T>(std::tanh(pre[i]));
  require_finite<T>(cand, "candidate state");

  for (std::size_t i = 0; i < h; ++i)
    out[i] = static_cast<T>((1.0 - double(z[i])) * double(h_prev[i]) +
                            double(z[i]) * double(cand[i]));
  require_finite<T>(out, "hidden state");

  if (cache) {
    cache->h_prev.assign(h_prev.begin(), h_prev.end());
    cache->update = std::move(z);
    cache->reset = std::move(r);
    cache->candidate = std::move(cand);
  }
  return out;
}

template <typename T>
std::vector<T> gru_encode(const GRUParams<T>& p, std::span<const std::uint32_t> ids,
                          GruTrace<T>* trace) {
  std::vector<T> state(p.hidden(), T{0});
  if (trace) {
    trace->token_ids.assign(ids.begin(), ids.end());
    trace->steps.clear();
    trace->steps.resize(ids.size());
  }
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= p.embedding.rows())
      throw VocabularyError("token id " + std::to_string(ids[t]) + " outside embedding table of " +
                            std::to_string(p.embedding.rows()) + " rows");
    state = gru_step<T>(p, p.embedding.row(ids[t]), state, trace ? &trace->steps[t] : nullptr);
  }
  return state;
}

template <typename T>
std::vector<T> mlp_forward(const MLPParams<T>& p, OutputActivation out_act,
                           std::span<const T> input, Mode mode, double dropout_rate, Rng* rng,
                           MlpTrace<T>* trace) {
  if (p.layers.empty()) throw ShapeError("MLP has no layers");
  if (input.size() != p.input_dim())
    throw ShapeError("MLP input has " + std::to_string(input.size()) + " components, expected " +
                     std::to_string(p.input_dim()));
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout rate must be in [0,1)");
  const bool drop = mode == Mode::kTrain && dropout_rate > 0.0;
  if (drop && !rng) throw ConfigError("train-mode dropout needs an rng");

  const auto nonzero = nonzero_indices(input);
  if (trace) {
    trace->inputs.assign(p.layers.size(), {});
    trace->pre_activations.assign(p.layers.size(), {});
    trace->dropout_scales.assign(p.layers.size() - 1, {});
    trace->input_nonzero = nonzero;
  }

  std::vector<T> x(input.begin(), input.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - dropout_rate));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& layer = p.layers[i];
    std::vector<T> a(layer.weight.rows());
    if (i == 0)
      affine_sparse<T>(layer.weight, x, nonzero, layer.bias, a);
    else
      affine<T>(layer.weight, x, layer.bias, a);
    const bool last = i + 1 == p.layers.size();
    std::vector<T> out(a.size());
    for (std::size_t j = 0; j < a.size(); ++j)
      out[j] = (last && out_act == OutputActivation::kLinear) ? a[j] : std::max(a[j], T{0});
    if (!last && drop) {
      std::vector<T> scales(out.size());
      for (std::size_t j = 0; j < out.size(); ++j) {
        scales[j] = unit(*rng) < dropout_rate ? T{0} : keep_scale;
        out[j] *= scales[j];
      }
      if (trace) trace->dropout_scales[i] = std::move(scales);
    }
    if (trace) {
      trace->inputs[i] = std::move(x);
      trace->pre_activations[i] = std::move(a);
    }
    x = std::move(out);
  }
  return x;
}

template <typename T>
std::vector<T> sentence_input(const W2VVParams<T>& model, const CaptionInputs& inputs,
                              GruTrace<T>* trace) {
  std::vector<T> s;
  s.reserve(model.layout.total());
  for (const auto& seg : model.layout.segments()) {
    auto check = [&](std::size_t got) {
      if (got != seg.length)
        throw ShapeError("segment '" + std::string(segment_name(seg.kind)) + "' has " +
                         std::to_string(got) + " components, model expects " +
                         std::to_string(seg.length));
    };
    switch (seg.kind) {
      case SegmentKind::kBow:
        check(inputs.bow.size());
        s.insert(s.end(), inputs.bow.begin(), inputs.bow.end());
        break;
      case SegmentKind::kMeanEmbedding:
        check(inputs.mean_embedding.size());
        s.insert(s.end(), inputs.mean_embedding.begin(), inputs.mean_embedding.end());
        break;
      case SegmentKind::kGru: {
        if (!model.gru) throw ShapeError("layout has a gru segment but the model has no GRU");
        auto h = gru_encode<T>(*model.gru, inputs.token_ids, trace);
        check(h.size());
        s.insert(s.end(), h.begin(), h.end());
        break;
      }
    }
  }
  if (!model.layout.has(SegmentKind::kBow) && !inputs.bow.empty())
    throw ShapeError("caption carries a bow segment the model was not built with");
  if (!model.layout.has(SegmentKind::kMeanEmbedding) && !inputs.mean_embedding.empty())
    throw ShapeError("caption carries a mean-embedding segment the model was not built with");
  return s;
}

template <typename T>
std::vector<T> forward(const W2VVParams<T>& model, const CaptionInputs& inputs, Mode mode,
                       double dropout_rate, Rng* rng, ForwardTrace<T>* trace) {
  const auto s = sentence_input<T>(model, inputs, trace ? &trace->gru : nullptr);
  if (trace && !model.gru) trace->gru = {};
  return mlp_forward<T>(model.mlp, model.output_activation, s, mode, dropout_rate, rng,
                        trace ? &trace->mlp : nullptr);
}

template <typename T>
void backward(const W2VVParams<T>& model, const ForwardTrace<T>& trace,
              std::span<const T> d_output, GradSet<T>& grads) {
  const auto& layers = model.mlp.layers;
  const auto& mt = trace.mlp;
  if (mt.inputs.size() != layers.size() || mt.pre_activations.size() != layers.size())
    throw ShapeError("trace does not match the model's layer count");
  if (d_output.size() != model.mlp.output_dim()) throw ShapeError("dL/dr has the wrong length");
  if (grads.values.mlp.layers.size() != layers.size() ||
      grads.values.gru.has_value() != model.gru.has_value())
    throw ShapeError("gradient set does not match the model");

  std::vector<T> delta(d_output.begin(), d_output.end());
  std::vector<T> dh_last;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const auto& a = mt.pre_activations[k];
    const auto& x = mt.inputs[k];
    if (a.size() != layer.weight.rows() || x.size() != layer.weight.cols())
      throw ShapeError("trace does not match layer " + std::to_string(k));
    const bool last = k + 1 == layers.size();
    if (!(last && model.output_activation == OutputActivation::kLinear))
      for (std::size_t j = 0; j < delta.size(); ++j)
        if (!(a[j] > T{0})) delta[j] = T{0};

    auto& g = grads.values.mlp.layers[k];
    if (k == 0)
      outer_add<T>(g.weight, delta, x, mt.input_nonzero);
    else
      outer_add<T>(g.weight, delta, x);
    for (std::size_t j = 0; j < delta.size(); ++j) g.bias[j] += delta[j];

    if (k > 0) {
      std::vector<T> dx(x.size(), T{0});
      matvec_transposed_add<T>(layer.weight, delta, dx);
      const auto& scales = mt.dropout_scales[k - 1];
      if (!scales.empty())
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] *= scales[j];
      delta = std::move(dx);
    } else if (model.gru) {
      // Only the GRU columns of the first layer feed back into parameters.
      const Segment* seg = model.layout.find(SegmentKind::kGru);
      std::vector<double> acc(seg->length, 0.0);
      for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const auto row = layer.weight.row(r).subspan(seg->offset, seg->length);
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += d * double(row[c]);
      }
      dh_last.resize(acc.size());
      for (std::size_t c = 0; c < acc.size(); ++c) dh_last[c] = static_cast<T>(acc[c]);
    }
  }

  if (!model.gru) return;
  const auto& p = *model.gru;
  auto& gg = *grads.values.gru;
  const auto& gt = trace.gru;
  if (gt.steps.size() != gt.token_ids.size()) throw ShapeError("GRU trace is inconsistent");
  const std::size_t h = p.hidden();
  const std::size_t e = p.input_dim();
  std::vector<T> dh = std::move(dh_last);
  std::vector<T> dh_prev(h), da_z(h), da_r(h), da_h(h), drh(h), rh(h), dx(e);
  for (std::size_t t = gt.steps.size(); t-- > 0;) {
    const auto& c = gt.steps[t];
    const auto id = gt.token_ids[t];
    if (id >= p.embedding.rows() || c.update.size() != h)
      throw ShapeError("GRU trace does not match the model");
    const auto x = p.embedding.row(id);

    for (std::size_t i = 0; i < h; ++i) {
      const T z = c.update[i];
      const T cand = c.candidate[i];
      const T dz = dh[i] * (cand - c.h_prev[i]);
      const T dcand = dh[i] * z;
      dh_prev[i] = dh[i] * (T{1} - z);
      da_h[i] = dcand * (T{1} - cand * cand);
      da_z[i] = dz * z * (T{1} - z);
      rh[i] = c.reset[i] * c.h_prev[i];
    }
    outer_add<T>(gg.candidate_input, da_h, x);
    outer_add<T>(gg.candidate_recurrent, da_h, rh);
    std::fill(drh.begin(), drh.end(), T{0});
    matvec_transposed_add<T>(p.candidate_recurrent, da_h, drh);
    for (std::size_t i = 0; i < h; ++i) {
      const T r = c.reset[i];
      da_r[i] = drh[i] * c.h_prev[i] * r * (T{1} - r);
      dh_prev[i] += drh[i] * r;
      gg.candidate_bias[i] += da_h[i];
      gg.update_bias[i] += da_z[i];
      gg.reset_bias[i] += da_r[i];
    }
    outer_add<T>(gg.update_input, da_z, x);
    outer_add<T>(gg.update_recurrent, da_z, c.h_prev);
    outer_add<T>(gg.reset_input, da_r, x);
    outer_add<T>(gg.reset_recurrent, da_r, c.h_prev);
    matvec_transposed_add<T>(p.update_recurrent, da_z, dh_prev);
    matvec_transposed_add<T>(p.reset_recurrent, da_r, dh_prev);

    std::fill(dx.begin(), dx.end(), T{0});
    matvec_transposed_add<T>(p.candidate_input, da_h, dx);
    matvec_transposed_add<T>(p.update_input, da_z, dx);
    matvec_transposed_add<T>(p.reset_input, da_r, dx);
    auto erow = gg.embedding.row(id);
    for (std::size_t j = 0; j < e; ++j) erow[j] += dx[j];

    std::swap(dh, dh_prev);
  }
}

std::vector<float> W2VVModel::predict(std::string_view caption) const {
  return forward<float>(params, encoder.encode(caption), Mode::kEval, 0.0, nullptr);
}

SentenceVector W2VVModel::sentence_vector(std::string_view caption) const {
  auto in = encoder.encode(caption);
  std::vector<std::pair<SegmentKind, std::vector<float>>> parts;
  if (!in.bow.empty()) parts.emplace_back(SegmentKind::kBow, std::move(in.bow));
  if (!in.mean_embedding.empty())
    parts.emplace_back(SegmentKind::kMeanEmbedding, std::move(in.mean_embedding));
  if (params.gru) parts.emplace_back(SegmentKind::kGru, gru_encode<float>(*params.gru, in.token_ids));
  auto sv = concat_multiscale(parts);
  if (!(sv.layout == params.layout)) throw ShapeError("encoder layout disagrees with the model");
  return sv;
}

#define W2VV_INSTANTIATE(T)                                                                    \
  template struct W2VVParams<T>;                                                               \
  template struct GradSet<T>;                                                                  \
  template std::vector<T> gru_step<T>(const GRUParams<T>&, std::span<const T>,                 \
                                      std::span<const T>, GruStepCache<T>*);                   \
  template std::vector<T> gru_encode<T>(const GRUParams<T>&, std::span<const std::uint32_t>,   \
                                        GruTrace<T>*);                                         \
  template std::vector<T> mlp_forward<T>(const MLPParams<T>&, OutputActivation,                \
                                         std::span<const T>, Mode, double, Rng*,               \
                                         MlpTrace<T>*);                                        \
  template std::vector<T> sentence_input<T>(const W2VVParams<T>&, const CaptionInputs&,        \
                                            GruTrace<T>*);                                     \
  template std::vector<T> forward<T>(const W2VVParams<T>&, const CaptionInputs&, Mode, double, \
                                     Rng*, ForwardTrace<T>*);                                  \
  template void backward<T>(const W2VVParams<T>&, const ForwardTrace<T>&, std::span<const T>,  \
                            GradSet<T>&);

W2VV_INSTANTIATE(float)
W2VV_INSTANTIATE(double)
#undef W2VV_INSTANTIATE

template W2VVParams<double> W2VVParams<float>::cast<double>() const;
template W2VVParams<float> W2VVParams<double>::cast<float>() const;
template W2VVParams<float> W2VVParams<float>::cast<float>() const;
template W2VVParams<double> W2VVParams<double>::cast<double>() const;

}  // namespace w2vv
