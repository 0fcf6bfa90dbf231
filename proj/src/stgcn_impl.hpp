#pragma once

// Template definitions for stgcn.hpp.

namespace gp {

template <typename T>
StgcnBlock StgcnBlock::create(ParamSet<T>& params, const std::string& name, std::size_t c_in, std::size_t c_out,
                              std::size_t num_nodes, std::size_t temporal_kernel, bool residual,
                              nn::Activation activation) {
  if (temporal_kernel % 2 == 0) throw ConfigError("temporal kernel extent must be odd");
  StgcnBlock b;
  b.c_in = c_in;
  b.c_out = c_out;
  b.temporal_kernel = temporal_kernel;
  b.residual = residual && c_in == c_out;
  b.activation = activation;
  b.spatial_w = params.add(name + ".spatial.w", {kNumPartitions, c_in, c_out});
  b.spatial_b = params.add(name + ".spatial.b", {c_out});
  b.importance = params.add(name + ".importance", {kNumPartitions, num_nodes, num_nodes});
  b.temporal_w = params.add(name + ".temporal.w", {temporal_kernel, c_out, c_out});
  b.temporal_b = params.add(name + ".temporal.b", {c_out});
  return b;
}

template <typename T>
void StgcnBlock::init(ParamSet<T>& params, Rng& rng) const {
  // He bounds keep activation scale through the stack without batch
  // normalization. The normalized partitions jointly average over a
  // neighborhood, so each partition matrix uses fan_in = c_in.
  auto& sw = params.value(spatial_w);
  {
    const double bound = std::sqrt(6.0 / static_cast<double>(c_in));
    for (auto& v : sw.values()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  params.value(spatial_b).zero();
  params.value(importance).fill(T{1});
  nn::initialize(params.value(temporal_w), nn::Init::he_uniform, rng);
  params.value(temporal_b).zero();
}

template <typename T>
Tensor<T> StgcnBlock::forward(const ParamSet<T>& params, const StGraph& graph, const Tensor<T>& x,
                              Cache<T>* cache) const {
  if (x.rank() != 4 || x.dim(2) != graph.num_nodes || x.dim(3) != c_in) {
    throw ShapeError("st-gcn block expects (N, F, " + std::to_string(graph.num_nodes) + ", " + std::to_string(c_in) +
                     "), got " + nn::shape_string(x.shape()));
  }
  const std::size_t n_win = x.dim(0), frames = x.dim(1), nodes = x.dim(2);
  const std::size_t rows = n_win * frames * nodes;
  const auto& w = params.value(spatial_w);
  const auto& mask = params.value(importance);
  const auto xm = nn::as_matrix(x.data(), rows, c_in);

  Tensor<T> projected({kNumPartitions, rows, c_out});
  for (std::size_t k = 0; k < kNumPartitions; ++k) {
    nn::as_matrix(projected.data() + k * rows * c_out, rows, c_out).noalias() =
        xm * nn::as_matrix(w.data() + k * c_in * c_out, c_in, c_out);
  }

  Tensor<T> z({n_win, frames, nodes, c_out});
  {
    auto zm = nn::as_matrix(z.data(), rows, c_out);
    zm.rowwise() = nn::as_matrix(params.value(spatial_b)).row(0);
  }
  const std::size_t frame_rows = n_win * frames;
  for (const auto& e : graph.support) {
    const T coef = static_cast<T>(e.weight) * mask[(e.k * nodes + e.i) * nodes + e.j];
    const T* src = projected.data() + (e.k * rows + e.j) * c_out;
    T* dst = z.data() + e.i * c_out;
    for (std::size_t r = 0; r < frame_rows; ++r) {
      const T* s = src + r * nodes * c_out;
      T* d = dst + r * nodes * c_out;
      for (std::size_t c = 0; c < c_out; ++c) d[c] += coef * s[c];
    }
  }

  Tensor<T> h = z;
  nn::activate_inplace(h, activation);

  Tensor<T> o({n_win, frames, nodes, c_out});
  nn::as_matrix(o.data(), rows, c_out).rowwise() = nn::as_matrix(params.value(temporal_b)).row(0);
  const auto& tw = params.value(temporal_w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(temporal_kernel / 2);
  const std::ptrdiff_t f_count = static_cast<std::ptrdiff_t>(frames);
  for (std::size_t n = 0; n < n_win; ++n) {
    for (std::size_t l = 0; l < temporal_kernel; ++l) {
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(l) - pad;
      const std::ptrdiff_t f0 = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t f1 = std::min<std::ptrdiff_t>(f_count, f_count - shift);
      if (f1 <= f0) continue;
      const std::size_t block_rows = static_cast<std::size_t>(f1 - f0) * nodes;
      const std::size_t out_row = (n * frames + static_cast<std::size_t>(f0)) * nodes;
      const std::size_t in_row = (n * frames + static_cast<std::size_t>(f0 + shift)) * nodes;
      nn::as_matrix(o.data() + out_row * c_out, block_rows, c_out).noalias() +=
          nn::as_matrix(h.data() + in_row * c_out, block_rows, c_out) *
          nn::as_matrix(tw.data() + l * c_out * c_out, c_out, c_out);
    }
  }
  if (residual) o += x;

  Tensor<T> out = o;
  nn::activate_inplace(out, activation);
  if (cache) {
    cache->input = x;
    cache->projected = std::move(projected);
    cache->spatial_pre = std::move(z);
    cache->spatial_act = std::move(h);
    cache->output_pre = std::move(o);
  }
  return out;
}

template <typename T>
Tensor<T> StgcnBlock::backward(const ParamSet<T>& params, const StGraph& graph, const Cache<T>& cache,
                               const Tensor<T>& dy, Grads<T>& grads, bool need_input_grad) const {
  const Tensor<T>& x = cache.input;
  const std::size_t n_win = x.dim(0), frames = x.dim(1), nodes = x.dim(2);
  const std::size_t rows = n_win * frames * nodes;
  cache.output_pre.check_same(dy);

  Tensor<T> d_o = dy;
  nn::activation_backward_inplace(d_o, cache.output_pre, activation);

  nn::as_matrix(grads[temporal_b]).row(0) += nn::as_matrix(d_o.data(), rows, c_out).colwise().sum();
  const auto& tw = params.value(temporal_w);
  Tensor<T>& d_tw = grads[temporal_w];
  Tensor<T> d_h({n_win, frames, nodes, c_out});
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(temporal_kernel / 2);
  const std::ptrdiff_t f_count = static_cast<std::ptrdiff_t>(frames);
  for (std::size_t n = 0; n < n_win; ++n) {
    for (std::size_t l = 0; l < temporal_kernel; ++l) {
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(l) - pad;
      const std::ptrdiff_t f0 = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t f1 = std::min<std::ptrdiff_t>(f_count, f_count - shift);
      if (f1 <= f0) continue;
      const std::size_t block_rows = static_cast<std::size_t>(f1 - f0) * nodes;
      const std::size_t out_row = (n * frames + static_cast<std::size_t>(f0)) * nodes;
      const std::size_t in_row = (n * frames + static_cast<std::size_t>(f0 + shift)) * nodes;
      const auto d_block = nn::as_matrix(d_o.data() + out_row * c_out, block_rows, c_out);
      nn::as_matrix(d_tw.data() + l * c_out * c_out, c_out, c_out).noalias() +=
          nn::as_matrix(cache.spatial_act.data() + in_row * c_out, block_rows, c_out).transpose() * d_block;
      nn::as_matrix(d_h.data() + in_row * c_out, block_rows, c_out).noalias() +=
          d_block * nn::as_matrix(tw.data() + l * c_out * c_out, c_out, c_out).transpose();
    }
  }

  Tensor<T>& d_z = d_h;
  nn::activation_backward_inplace(d_z, cache.spatial_pre, activation);
  nn::as_matrix(grads[spatial_b]).row(0) += nn::as_matrix(d_z.data(), rows, c_out).colwise().sum();

  const auto& mask = params.value(importance);
  Tensor<T>& d_mask = grads[importance];
  Tensor<T> d_proj({kNumPartitions, rows, c_out});
  const std::size_t frame_rows = n_win * frames;
  for (const auto& e : graph.support) {
    const std::size_t mi = (e.k * nodes + e.i) * nodes + e.j;
    const T a = static_cast<T>(e.weight);
    const T coef = a * mask[mi];
    const T* proj = cache.projected.data() + (e.k * rows + e.j) * c_out;
    T* dproj = d_proj.data() + (e.k * rows + e.j) * c_out;
    const T* dz = d_z.data() + e.i * c_out;
    T dot = 0;
    for (std::size_t r = 0; r < frame_rows; ++r) {
      const std::size_t off = r * nodes * c_out;
      for (std::size_t c = 0; c < c_out; ++c) {
        dproj[off + c] += coef * dz[off + c];
        dot += dz[off + c] * proj[off + c];
      }
    }
    d_mask[mi] += a * dot;
  }

  const auto& w = params.value(spatial_w);
  Tensor<T>& d_w = grads[spatial_w];
  const auto xm = nn::as_matrix(x.data(), rows, c_in);
  Tensor<T> dx;
  if (need_input_grad) dx = residual ? d_o : Tensor<T>(x.shape());
  for (std::size_t k = 0; k < kNumPartitions; ++k) {
    const auto dpk = nn::as_matrix(d_proj.data() + k * rows * c_out, rows, c_out);
    nn::as_matrix(d_w.data() + k * c_in * c_out, c_in, c_out).noalias() += xm.transpose() * dpk;
    if (need_input_grad) {
      nn::as_matrix(dx.data(), rows, c_in).noalias() += dpk * nn::as_matrix(w.data() + k * c_in * c_out, c_in, c_out).transpose();
    }
  }
  return dx;
}

template <typename T>
StgcnEmbedder StgcnEmbedder::create(ParamSet<T>& params, const StgcnConfig& cfg, std::size_t num_nodes) {
  if (cfg.channels.empty()) throw ConfigError("st-gcn needs at least one block");
  StgcnEmbedder e;
  std::size_t c_in = kFeatureChannels;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    e.blocks.push_back(StgcnBlock::create(params, "stgcn.block" + std::to_string(i), c_in, cfg.channels[i], num_nodes,
                                          cfg.temporal_kernel, true, cfg.activation));
    c_in = cfg.channels[i];
  }
  return e;
}

template <typename T>
Tensor<T> StgcnEmbedder::forward(const ParamSet<T>& params, const StGraph& graph, const Tensor<T>& windows,
                                 Cache<T>* cache) const {
  if (cache) cache->blocks.resize(blocks.size());
  Tensor<T> h = windows;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    h = blocks[b].forward(params, graph, h, cache ? &cache->blocks[b] : nullptr);
  }
  const std::size_t n_win = h.dim(0);
  const std::size_t per_window = h.dim(1) * h.dim(2);
  const std::size_t d = h.dim(3);
  Tensor<T> embed({n_win, d});
  const T inv = T{1} / static_cast<T>(per_window);
  for (std::size_t n = 0; n < n_win; ++n) {
    nn::as_matrix(embed.data() + n * d, 1, d) =
        nn::as_matrix(h.data() + n * per_window * d, per_window, d).colwise().sum() * inv;
  }
  if (cache) cache->last_shape = h.shape();
  return embed;
}

template <typename T>
void StgcnEmbedder::backward(const ParamSet<T>& params, const StGraph& graph, const Cache<T>& cache,
                             const Tensor<T>& d_embed, Grads<T>& grads) const {
  const Shape& s = cache.last_shape;
  const std::size_t per_window = s[1] * s[2];
  const std::size_t d = s[3];
  Tensor<T> g(s);
  const T inv = T{1} / static_cast<T>(per_window);
  for (std::size_t n = 0; n < s[0]; ++n) {
    nn::as_matrix(g.data() + n * per_window * d, per_window, d).rowwise() =
        nn::as_matrix(d_embed.data() + n * d, 1, d).row(0) * inv;
  }
  for (std::size_t b = blocks.size(); b-- > 0;) {
    g = blocks[b].backward(params, graph, cache.blocks[b], g, grads, b > 0);
  }
}

}  // namespace gp
