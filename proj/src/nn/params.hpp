#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nn/tensor.hpp"

namespace gp::nn {

template <typename T>
struct ParamBlock {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

/// Gradient buffers laid out parallel to a ParamSet's blocks.
template <typename T>
using Grads = std::vector<Tensor<T>>;

enum class Init { zeros, ones, glorot_uniform, he_uniform };

/// Ordered, name-unique collection of parameter blocks. Block indices are
/// stable and are what layers hold on to.
template <typename T>
class ParamSet {
 public:
  std::size_t add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
    index_[name] = blocks_.size();
    ParamBlock<T> b{name, Tensor<T>(shape), Tensor<T>(shape)};
    blocks_.push_back(std::move(b));
    return blocks_.size() - 1;
  }

  std::size_t size() const { return blocks_.size(); }
  ParamBlock<T>& operator[](std::size_t i) { return blocks_[i]; }
  const ParamBlock<T>& operator[](std::size_t i) const { return blocks_[i]; }
  Tensor<T>& value(std::size_t i) { return blocks_[i].value; }
  const Tensor<T>& value(std::size_t i) const { return blocks_[i].value; }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.value.size();
    return n;
  }

  Grads<T> make_grads() const {
    Grads<T> g;
    g.reserve(blocks_.size());
    for (const auto& b : blocks_) g.emplace_back(b.value.shape());
    return g;
  }

  void zero_grads() {
    for (auto& b : blocks_) b.grad.zero();
  }

  /// grad += g, block by block.
  void accumulate(const Grads<T>& g, T scale = T{1}) {
    if (g.size() != blocks_.size()) throw ShapeError("gradient buffer count mismatch");
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].grad.check_same(g[i]);
      T* dst = blocks_[i].grad.data();
      const T* src = g[i].data();
      for (std::size_t k = 0; k < g[i].size(); ++k) dst[k] += scale * src[k];
    }
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& b : blocks_) {
      const std::size_t i = out.add(b.name, b.value.shape());
      out[i].value = b.value.template cast<U>();
    }
    return out;
  }

 private:
  std::vector<ParamBlock<T>> blocks_;
  std::map<std::string, std::size_t> index_;
};

/// Fills `t` per `init`. Fans are fan_in = dim(rank-2) and
/// fan_out = dim(rank-1), times any leading extents as receptive field.
/// Glorot uses ±sqrt(6/(fan_in+fan_out)), He ±sqrt(6/fan_in).
template <typename T>
void initialize(Tensor<T>& t, Init init, Rng& rng) {
  switch (init) {
    case Init::zeros: t.zero(); return;
    case Init::ones: t.fill(T{1}); return;
    case Init::glorot_uniform:
    case Init::he_uniform: {
      const auto& s = t.shape();
      if (s.size() < 2) throw ShapeError("fan-based init needs rank >= 2");
      std::size_t receptive = 1;
      for (std::size_t i = 0; i + 2 < s.size(); ++i) receptive *= s[i];
      const double fan_in = static_cast<double>(s[s.size() - 2] * receptive);
      const double fan_out = static_cast<double>(s[s.size() - 1] * receptive);
      const double bound = std::sqrt(6.0 / (init == Init::he_uniform ? fan_in : fan_in + fan_out));
      for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      return;
    }
  }
}

struct LrSchedule {
  double base_lr = 0.1;
  std::size_t warmup_epochs = 20;
  std::size_t decay_epoch = 50;
  double decay_factor = 10.0;
  std::size_t total_epochs = 80;

  void validate() const;
};

/// Linear warmup base·(epoch+1)/warmup, then base, then base/decay_factor
/// from decay_epoch on.
double lr_at(const LrSchedule& schedule, std::size_t epoch);

/// value ← value − lr·(grad + l2·value); gradients are zeroed afterwards.
template <typename T>
void sgd_step(ParamSet<T>& params, double lr, double l2_weight = 1e-4) {
  for (auto& b : params) {
    b.value.check_same(b.grad);
    T* v = b.value.data();
    T* g = b.grad.data();
    const T lr_t = static_cast<T>(lr);
    const T l2_t = static_cast<T>(l2_weight);
    for (std::size_t i = 0; i < b.value.size(); ++i) {
      v[i] -= lr_t * (g[i] + l2_t * v[i]);
      g[i] = T{0};
    }
  }
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_block;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Loss callback for grad_check: evaluates the loss at the current parameter
/// values and, when `with_grad` is set, accumulates the analytic gradient
/// into each block's `grad`. Must return a one-element tensor.
using LossFn = std::function<Tensor<double>(ParamSet<double>&, bool with_grad)>;

/// Compares analytic gradients against central differences
/// (f(θ+ε) − f(θ−ε)) / 2ε entry by entry; relative error uses the
/// denominator max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const LossFn& loss, ParamSet<double>& params, double epsilon = 1e-5);

// Checkpoints: manifest.json plus params.bin of little-endian arrays.
struct CheckpointMeta {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string precision;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParamSet<T>& params, const CheckpointMeta& meta);

/// Loads blocks into an existing set; names and shapes must match.
template <typename T>
CheckpointMeta load_checkpoint(const std::filesystem::path& dir, ParamSet<T>& params);

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

}  // namespace gp::nn
