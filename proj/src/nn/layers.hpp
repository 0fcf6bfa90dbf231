#pragma once

#include <string>

#include "nn/params.hpp"

namespace gp::nn {

enum class Activation { relu, identity };

Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

template <typename T>
void activate_inplace(Tensor<T>& x, Activation a) {
  if (a == Activation::relu) {
    for (auto& v : x.values()) v = v > T{0} ? v : T{0};
  }
}

/// dx ⊙= act'(pre), evaluated at the pre-activation values.
template <typename T>
void activation_backward_inplace(Tensor<T>& grad, const Tensor<T>& pre, Activation a) {
  if (a == Activation::relu) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!(pre[i] > T{0})) grad[i] = T{0};
    }
  }
}

/// y = x W + b with W stored (in, out).
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  bool has_bias = true;

  template <typename T>
  static Linear create(ParamSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias = true) {
    Linear l;
    l.weight = params.add(name + ".w", {in, out});
    l.has_bias = with_bias;
    if (with_bias) l.bias = params.add(name + ".b", {out});
    return l;
  }

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    initialize(params.value(weight), Init::glorot_uniform, rng);
    if (has_bias) params.value(bias).zero();
  }

  /// x: (n, in) → (n, out).
  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& x) const {
    const auto& w = params.value(weight);
    if (x.shape().back() != w.dim(0)) {
      throw ShapeError("linear layer expects width " + std::to_string(w.dim(0)) + ", got " + shape_string(x.shape()));
    }
    Shape out_shape = x.shape();
    out_shape.back() = w.dim(1);
    Tensor<T> y(out_shape);
    auto ym = as_matrix(y);
    ym.noalias() = as_matrix(x) * as_matrix(w);
    if (has_bias) ym.rowwise() += as_matrix(params.value(bias)).row(0);
    return y;
  }

  /// Accumulates dW, db into `grads`; returns dx.
  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Tensor<T>& x, const Tensor<T>& dy, Grads<T>& grads) const {
    const auto& w = params.value(weight);
    as_matrix(grads[weight]).noalias() += as_matrix(x).transpose() * as_matrix(dy);
    if (has_bias) as_matrix(grads[bias]).row(0) += as_matrix(dy).colwise().sum();
    Tensor<T> dx(x.shape());
    as_matrix(dx).noalias() = as_matrix(dy) * as_matrix(w).transpose();
    return dx;
  }
};

/// Per-row normalization with learned gain and bias.
struct LayerNorm {
  std::size_t gain = 0;
  std::size_t bias = 0;
  double epsilon = 1e-5;

  template <typename T>
  struct Cache {
    Tensor<T> normalized;
    std::vector<T> inv_std;
  };

  template <typename T>
  static LayerNorm create(ParamSet<T>& params, const std::string& name, std::size_t d) {
    LayerNorm l;
    l.gain = params.add(name + ".gain", {d});
    l.bias = params.add(name + ".bias", {d});
    return l;
  }

  template <typename T>
  void init(ParamSet<T>& params) const {
    params.value(gain).fill(T{1});
    params.value(bias).zero();
  }

  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const Tensor<T>& x, Cache<T>* cache) const {
    const std::size_t d = x.shape().back();
    const std::size_t n = x.size() / d;
    const auto& g = params.value(gain);
    const auto& b = params.value(bias);
    if (g.size() != d) throw ShapeError("layer norm width mismatch");
    Tensor<T> y(x.shape());
    Tensor<T> xhat(x.shape());
    std::vector<T> inv(n);
    for (std::size_t r = 0; r < n; ++r) {
      const T* xr = x.data() + r * d;
      T mean = 0;
      for (std::size_t c = 0; c < d; ++c) mean += xr[c];
      mean /= static_cast<T>(d);
      T var = 0;
      for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
      var /= static_cast<T>(d);
      inv[r] = T{1} / std::sqrt(var + static_cast<T>(epsilon));
      for (std::size_t c = 0; c < d; ++c) {
        const T h = (xr[c] - mean) * inv[r];
        xhat[r * d + c] = h;
        y[r * d + c] = g[c] * h + b[c];
      }
    }
    if (cache) {
      cache->normalized = std::move(xhat);
      cache->inv_std = std::move(inv);
    }
    return y;
  }

  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const Cache<T>& cache, const Tensor<T>& dy, Grads<T>& grads) const {
    const std::size_t d = dy.shape().back();
    const std::size_t n = dy.size() / d;
    const auto& g = params.value(gain);
    Tensor<T>& dg = grads[gain];
    Tensor<T>& db = grads[bias];
    Tensor<T> dx(dy.shape());
    std::vector<T> dh(d);
    for (std::size_t r = 0; r < n; ++r) {
      const T* h = cache.normalized.data() + r * d;
      const T* dyr = dy.data() + r * d;
      T sum_dh = 0, sum_dh_h = 0;
      for (std::size_t c = 0; c < d; ++c) {
        dg[c] += dyr[c] * h[c];
        db[c] += dyr[c];
        dh[c] = dyr[c] * g[c];
        sum_dh += dh[c];
        sum_dh_h += dh[c] * h[c];
      }
      const T inv_d = T{1} / static_cast<T>(d);
      for (std::size_t c = 0; c < d; ++c) {
        dx[r * d + c] = cache.inv_std[r] * (dh[c] - inv_d * sum_dh - h[c] * inv_d * sum_dh_h);
      }
    }
    return dx;
  }
};

}  // namespace gp::nn
