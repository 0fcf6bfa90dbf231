#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nn/layers.hpp"

namespace gp {

using nn::Grads;
using nn::ParamSet;
using nn::Shape;
using nn::Tensor;

enum class PositionalMode { sinusoidal, learned, none };

PositionalMode parse_positional(const std::string& s);
std::string to_string(PositionalMode m);

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t layers = 4;
  std::size_t max_len = 64;
  PositionalMode positional = PositionalMode::sinusoidal;
  double dropout = 0.0;
  /// Post-norm layer normalization; off only for residual-path tests.
  bool layer_norm = true;

  void validate() const;
};

/// Sinusoidal table (max_len, d): sin at even columns, cos at odd ones.
template <typename T>
Tensor<T> sinusoidal_table(std::size_t max_len, std::size_t d) {
  Tensor<T> t({max_len, d});
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(pos) * rate;
      t.at(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return t;
}

/// Inverted dropout mask; scale 1/(1-rate) on kept entries.
template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, Rng& rng) {
  Tensor<T> m(shape, T{1});
  if (rate <= 0.0) return m;
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& v : m.values()) v = rng.uniform() < rate ? T{0} : keep;
  return m;
}

/// Multi-head scaled dot-product self-attention over a (t, d) sequence.
struct MultiHeadAttention {
  std::size_t heads = 1;
  nn::Linear query, key, value, output;

  template <typename T>
  struct Cache {
    Tensor<T> input, q, k, v, concat;
    Tensor<T> weights;  // (heads, t, t), rows sum to one
  };

  template <typename T>
  static MultiHeadAttention create(ParamSet<T>& params, const std::string& name, std::size_t d, std::size_t heads) {
    if (heads == 0 || d % heads != 0) throw ConfigError("model width must be divisible by the head count");
    MultiHeadAttention m;
    m.heads = heads;
    m.query = nn::Linear::create(params, name + ".wq", d, d);
    // A key bias only shifts each score row by a constant, which softmax ignores.
    m.key = nn::Linear::create(params, name + ".wk", d, d, false);
    m.value = nn::Linear::create(params, name + ".wv", d, d);
    m.output = nn::Linear::create(params, name + ".wo", d, d);
    return m;
  }

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    for (const auto* l : {&query, &key, &value, &output}) l->init(params, rng);
  }

  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& u, Cache<T>* cache) const {
    if (u.rank() != 2 || u.dim(0) == 0) throw ShapeError("attention expects a nonempty (t, d) input");
    const std::size_t t = u.dim(0), d = u.dim(1), dh = d / heads;
    Tensor<T> q = query.forward(params, u);
    Tensor<T> k = key.forward(params, u);
    Tensor<T> v = value.forward(params, u);
    Tensor<T> weights({heads, t, t});
    Tensor<T> concat({t, d});
    const T scale = T{1} / std::sqrt(static_cast<T>(dh));
    const auto qm = nn::as_matrix(q), km = nn::as_matrix(k), vm = nn::as_matrix(v);
    auto cm = nn::as_matrix(concat);
    const auto ti = static_cast<Eigen::Index>(t), dhi = static_cast<Eigen::Index>(dh);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h * dh);
      auto w = nn::as_matrix(weights.data() + h * t * t, t, t);
      w.noalias() = qm.block(0, col, ti, dhi) * km.block(0, col, ti, dhi).transpose() * scale;
      for (std::size_t r = 0; r < t; ++r) nn::softmax_inplace<T>(std::span<T>(weights.data() + (h * t + r) * t, t));
      cm.block(0, col, ti, dhi).noalias() = w * vm.block(0, col, ti, dhi);
    }
    Tensor<T> out = output.forward(params, concat);
    if (cache) {
      cache->input = u;
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->concat = std::move(concat);
      cache->weights = std::move(weights);
    }
    return out;
  }

  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Cache<T>& c, const Tensor<T>& dy, Grads<T>& grads) const {
    const std::size_t t = c.input.dim(0), d = c.input.dim(1), dh = d / heads;
    const Tensor<T> d_concat = output.backward(params, c.concat, dy, grads);
    Tensor<T> dq({t, d}), dk({t, d}), dv({t, d});
    const T scale = T{1} / std::sqrt(static_cast<T>(dh));
    const auto ti = static_cast<Eigen::Index>(t), dhi = static_cast<Eigen::Index>(dh);
    nn::RowMatrix<T> dp(ti, ti);
    for (std::size_t h = 0; h < heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h * dh);
      const auto w = nn::as_matrix(c.weights.data() + h * t * t, t, t);
      const auto dc = nn::as_matrix(d_concat).block(0, col, ti, dhi);
      dp.noalias() = dc * nn::as_matrix(c.v).block(0, col, ti, dhi).transpose();
      nn::as_matrix(dv).block(0, col, ti, dhi).noalias() = w.transpose() * dc;
      // softmax backward row by row: ds = w ⊙ (dp − Σ dp ⊙ w)
      for (Eigen::Index r = 0; r < ti; ++r) {
        const T dot = (dp.row(r).array() * w.row(r).array()).sum();
        dp.row(r) = (w.row(r).array() * (dp.row(r).array() - dot)).matrix() * scale;
      }
      nn::as_matrix(dq).block(0, col, ti, dhi).noalias() = dp * nn::as_matrix(c.k).block(0, col, ti, dhi);
      nn::as_matrix(dk).block(0, col, ti, dhi).noalias() = dp.transpose() * nn::as_matrix(c.q).block(0, col, ti, dhi);
    }
    Tensor<T> du = query.backward(params, c.input, dq, grads);
    du += key.backward(params, c.input, dk, grads);
    du += value.backward(params, c.input, dv, grads);
    return du;
  }
};

/// Position-wise two-layer feedforward network with a rectifier between.
struct FeedForward {
  nn::Linear inner, outer;

  template <typename T>
  struct Cache {
    Tensor<T> input, hidden_pre, hidden;
  };

  template <typename T>
  static FeedForward create(ParamSet<T>& params, const std::string& name, std::size_t d, std::size_t hidden) {
    return {nn::Linear::create(params, name + ".w1", d, hidden), nn::Linear::create(params, name + ".w2", hidden, d)};
  }

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    inner.init(params, rng);
    outer.init(params, rng);
  }

  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& x, Cache<T>* cache) const {
    Tensor<T> pre = inner.forward(params, x);
    Tensor<T> h = pre;
    nn::activate_inplace(h, nn::Activation::relu);
    Tensor<T> y = outer.forward(params, h);
    if (cache) *cache = {x, std::move(pre), std::move(h)};
    return y;
  }

  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Cache<T>& c, const Tensor<T>& dy, Grads<T>& grads) const {
    Tensor<T> dh = outer.backward(params, c.hidden, dy, grads);
    nn::activation_backward_inplace(dh, c.hidden_pre, nn::Activation::relu);
    return inner.backward(params, c.input, dh, grads);
  }
};

/// Post-norm encoder layer: LN(u + MHSA(u)), then LN(· + FFN(·)).
struct EncoderLayer {
  MultiHeadAttention attention;
  FeedForward ffn;
  std::optional<nn::LayerNorm> norm1, norm2;

  template <typename T>
  struct Cache {
    typename MultiHeadAttention::template Cache<T> attention;
    typename FeedForward::template Cache<T> ffn;
    nn::LayerNorm::Cache<T> norm1, norm2;
    Tensor<T> drop1, drop2;
  };

  template <typename T>
  static EncoderLayer create(ParamSet<T>& params, const std::string& name, const EncoderConfig& cfg) {
    EncoderLayer l;
    l.attention = MultiHeadAttention::create(params, name + ".mhsa", cfg.d_model, cfg.heads);
    if (cfg.layer_norm) l.norm1 = nn::LayerNorm::create(params, name + ".norm1", cfg.d_model);
    l.ffn = FeedForward::create(params, name + ".ffn", cfg.d_model, cfg.ffn_dim);
    if (cfg.layer_norm) l.norm2 = nn::LayerNorm::create(params, name + ".norm2", cfg.d_model);
    return l;
  }

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    attention.init(params, rng);
    ffn.init(params, rng);
    if (norm1) norm1->init(params);
    if (norm2) norm2->init(params);
  }

  /// `dropout_rng` non-null enables dropout on both residual branches.
  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& u, double dropout, Rng* dropout_rng,
                    Cache<T>* cache) const {
    Tensor<T> a = attention.forward(params, u, cache ? &cache->attention : nullptr);
    Tensor<T> drop1, drop2;
    if (dropout_rng && dropout > 0.0) {
      drop1 = dropout_mask<T>(a.shape(), dropout, *dropout_rng);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] *= drop1[i];
    }
    a += u;
    Tensor<T> u1 = norm1 ? norm1->forward(params, a, cache ? &cache->norm1 : nullptr) : a;
    Tensor<T> f = ffn.forward(params, u1, cache ? &cache->ffn : nullptr);
    if (dropout_rng && dropout > 0.0) {
      drop2 = dropout_mask<T>(f.shape(), dropout, *dropout_rng);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] *= drop2[i];
    }
    f += u1;
    Tensor<T> u2 = norm2 ? norm2->forward(params, f, cache ? &cache->norm2 : nullptr) : f;
    if (cache) {
      cache->drop1 = std::move(drop1);
      cache->drop2 = std::move(drop2);
    }
    return u2;
  }

  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Cache<T>& c, const Tensor<T>& dy, Grads<T>& grads) const {
    Tensor<T> d_r2 = norm2 ? norm2->backward(params, c.norm2, dy, grads) : dy;
    Tensor<T> d_f = d_r2;
    if (!c.drop2.empty()) {
      for (std::size_t i = 0; i < d_f.size(); ++i) d_f[i] *= c.drop2[i];
    }
    Tensor<T> d_u1 = ffn.backward(params, c.ffn, d_f, grads);
    d_u1 += d_r2;
    Tensor<T> d_r1 = norm1 ? norm1->backward(params, c.norm1, d_u1, grads) : d_u1;
    Tensor<T> d_a = d_r1;
    if (!c.drop1.empty()) {
      for (std::size_t i = 0; i < d_a.size(); ++i) d_a[i] *= c.drop1[i];
    }
    Tensor<T> du = attention.backward(params, c.attention, d_a, grads);
    du += d_r1;
    return du;
  }
};

/// Positional encoding followed by a stack of encoder layers.
struct Encoder {
  EncoderConfig config;
  std::vector<EncoderLayer> layers;
  std::optional<std::size_t> learned_positions;

  template <typename T>
  struct Cache {
    std::vector<typename EncoderLayer::template Cache<T>> layers;
  };

  template <typename T>
  static Encoder create(ParamSet<T>& params, const EncoderConfig& cfg) {
    cfg.validate();
    Encoder e;
    e.config = cfg;
    if (cfg.positional == PositionalMode::learned) {
      e.learned_positions = params.add("encoder.positional", {cfg.max_len, cfg.d_model});
    }
    for (std::size_t i = 0; i < cfg.layers; ++i) {
      e.layers.push_back(EncoderLayer::create(params, "encoder.layer" + std::to_string(i), cfg));
    }
    return e;
  }

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    if (learned_positions) {
      for (auto& v : params.value(*learned_positions).values()) v = static_cast<T>(rng.uniform(-0.1, 0.1));
    }
    for (const auto& l : layers) l.init(params, rng);
  }

  template <typename T>
  Tensor<T> positional_rows(const ParamSet<T>& params, std::size_t t) const {
    Tensor<T> rows({t, config.d_model});
    if (config.positional == PositionalMode::sinusoidal) {
      const Tensor<T> table = sinusoidal_table<T>(t, config.d_model);
      rows = table;
    } else if (config.positional == PositionalMode::learned) {
      const auto& table = params.value(*learned_positions);
      std::copy(table.data(), table.data() + t * config.d_model, rows.data());
    }
    return rows;
  }

  /// e: (t, d) → u: (t, d).
  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& e, Rng* dropout_rng, Cache<T>* cache) const {
    if (e.rank() != 2 || e.dim(1) != config.d_model) throw ShapeError("encoder expects (t, d_model) input");
    if (e.dim(0) > config.max_len) {
      throw LengthError("sequence of " + std::to_string(e.dim(0)) + " windows exceeds encoder max_len " +
                        std::to_string(config.max_len));
    }
    Tensor<T> u = e;
    u += positional_rows(params, e.dim(0));
    if (cache) cache->layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      u = layers[i].forward(params, u, config.dropout, dropout_rng, cache ? &cache->layers[i] : nullptr);
    }
    return u;
  }

  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Cache<T>& c, const Tensor<T>& du, Grads<T>& grads) const {
    Tensor<T> g = du;
    for (std::size_t i = layers.size(); i-- > 0;) g = layers[i].backward(params, c.layers[i], g, grads);
    if (learned_positions) {
      auto& dp = grads[*learned_positions];
      for (std::size_t k = 0; k < g.size(); ++k) dp[k] += g[k];
    }
    return g;
  }
};

/// The identity used when the encoder is ablated.
template <typename T>
Tensor<T> ablate_encoder(const Tensor<T>& e) {
  return e;
}

/// Two position-wise affine layers d → hidden → labels.
struct Head {
  nn::Linear hidden, output;

  template <typename T>
  struct Cache {
    Tensor<T> input, pre, act;
  };

  template <typename T>
  static Head create(ParamSet<T>& params, std::size_t d, std::size_t hidden_dim, std::size_t labels) {
    return {nn::Linear::create(params, "head.fc1", d, hidden_dim), nn::Linear::create(params, "head.fc2", hidden_dim, labels)};
  }

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    hidden.init(params, rng);
    output.init(params, rng);
  }

  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& u, Cache<T>* cache) const {
    Tensor<T> pre = hidden.forward(params, u);
    Tensor<T> act = pre;
    nn::activate_inplace(act, nn::Activation::relu);
    Tensor<T> y = output.forward(params, act);
    if (cache) *cache = {u, std::move(pre), std::move(act)};
    return y;
  }

  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Cache<T>& c, const Tensor<T>& dy, Grads<T>& grads) const {
    Tensor<T> da = output.backward(params, c.act, dy, grads);
    nn::activation_backward_inplace(da, c.pre, nn::Activation::relu);
    return hidden.backward(params, c.input, da, grads);
  }
};

}  // namespace gp
