#include "model.hpp"

#include <algorithm>
#include <cmath>

namespace gp {

std::string ModelVariant::name() const {
  std::string n = labeling == Labeling::multi_phase ? "multi-phase" : "binary";
  n += prediction == Prediction::crf ? "/crf" : "/classification";
  n += encoder_present ? "/te" : "/no-te";
  return n;
}

ModelVariant ModelVariant::parse(const std::string& name) {
  for (const auto& v : all()) {
    if (v.name() == name) return v;
  }
  throw ConfigError("unknown model variant '" + name + "' (expected e.g. multi-phase/crf/te)");
}

std::array<ModelVariant, 8> ModelVariant::all() {
  std::array<ModelVariant, 8> out;
  std::size_t i = 0;
  for (bool te : {false, true}) {
    for (Labeling l : {Labeling::binary, Labeling::multi_phase}) {
      for (Prediction p : {Prediction::classification, Prediction::crf}) out[i++] = {l, p, te};
    }
  }
  return out;
}

std::vector<std::uint8_t> ModelVariant::codes(const std::vector<PhaseLabel>& labels) const {
  std::vector<std::uint8_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = code(labels[i]);
  return out;
}

void ModelConfig::validate() const {
  if (stgcn.channels.empty()) throw ConfigError("st-gcn channel list is empty");
  for (auto c : stgcn.channels) {
    if (c == 0) throw ConfigError("st-gcn channel widths must be positive");
  }
  if (head_hidden == 0) throw ConfigError("head hidden width must be positive");
  if (encoder.d_model != stgcn.embed_dim()) throw ConfigError("encoder width must equal the st-gcn embedding width");
  if (variant.encoder_present) encoder.validate();
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    if (!std::isfinite(input_shift[c]) || !(input_scale[c] > 0.0) || !std::isfinite(input_scale[c])) {
      throw ConfigError("input standardization needs finite shifts and positive scales");
    }
  }
}

void fit_input_standardization(ModelConfig& cfg, std::span<const WindowSequence* const> sequences) {
  std::array<double, kFeatureChannels> sum{}, sq{};
  std::size_t n = 0;
  for (const auto* q : sequences) {
    for (const auto& w : q->windows) {
      for (std::size_t k = 0; k < w.features.size(); ++k) {
        const double v = w.features[k];
        sum[k % kFeatureChannels] += v;
        sq[k % kFeatureChannels] += v * v;
      }
      n += w.features.size() / kFeatureChannels;
    }
  }
  if (n == 0) throw ContractError("cannot fit input standardization without windows");
  for (std::size_t c = 0; c < kFeatureChannels; ++c) {
    const double mean = sum[c] / static_cast<double>(n);
    const double var = std::max(0.0, sq[c] / static_cast<double>(n) - mean * mean);
    cfg.input_shift[c] = mean;
    cfg.input_scale[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
}

template <typename T>
Model<T>::Model(ModelConfig cfg, StGraph graph) : cfg_(std::move(cfg)), graph_(std::move(graph)) {
  cfg_.encoder.d_model = cfg_.stgcn.embed_dim();
  cfg_.validate();
  embedder_ = StgcnEmbedder::create(params_, cfg_.stgcn, graph_.num_nodes);
  if (cfg_.variant.encoder_present) encoder_ = Encoder::create(params_, cfg_.encoder);
  head_ = Head::create(params_, cfg_.stgcn.embed_dim(), cfg_.head_hidden, num_labels());
  if (cfg_.variant.prediction == Prediction::crf) {
    crf_transitions_ = params_.add("crf.transitions", {num_labels(), num_labels()});
    crf_start_ = params_.add("crf.start", {num_labels()});
    crf_end_ = params_.add("crf.end", {num_labels()});
  }
}

template <typename T>
void Model<T>::init(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 0x1a17);
  embedder_.init(params_, rng);
  if (encoder_) encoder_->init(params_, rng);
  head_.init(params_, rng);
  if (cfg_.variant.prediction == Prediction::crf) {
    params_.value(crf_transitions_).zero();
    params_.value(crf_start_).zero();
    params_.value(crf_end_).zero();
  }
  params_.zero_grads();
}

template <typename T>
Tensor<T> Model<T>::window_tensor(const WindowSequence& seq) const {
  if (seq.windows.empty()) throw ShapeError("empty window sequence");
  const std::size_t frames = seq.windows.front().length;
  const std::size_t per_window = frames * kNumJoints * kFeatureChannels;
  Tensor<T> out({seq.windows.size(), frames, kNumJoints, kFeatureChannels});
  for (std::size_t i = 0; i < seq.windows.size(); ++i) {
    const auto& f = seq.windows[i].features;
    if (f.size() != per_window) {
      throw ShapeError("window " + std::to_string(i) + " has " + std::to_string(f.size()) + " features, expected " +
                       std::to_string(per_window));
    }
    T* dst = out.data() + i * per_window;
    for (std::size_t k = 0; k < per_window; ++k) {
      const std::size_t c = k % kFeatureChannels;
      dst[k] = static_cast<T>((f[k] - cfg_.input_shift[c]) / cfg_.input_scale[c]);
    }
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::embed(const Tensor<T>& windows, Cache* cache) const {
  return embedder_.forward(params_, graph_, windows, cache ? &cache->embed : nullptr);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& windows, Rng* dropout_rng, Cache* cache) const {
  Tensor<T> e = embed(windows, cache);
  Tensor<T> u = encoder_ ? encoder_->forward(params_, e, dropout_rng, cache ? &cache->encoder : nullptr)
                         : ablate_encoder(e);
  return head_.forward(params_, u, cache ? &cache->head : nullptr);
}

template <typename T>
CrfParams<T> Model<T>::crf_params() const {
  if (cfg_.variant.prediction != Prediction::crf) return CrfParams<T>(num_labels());
  return CrfParams<T>(params_.value(crf_transitions_), params_.value(crf_start_), params_.value(crf_end_));
}

template <typename T>
T Model<T>::loss_from_emissions(const Tensor<T>& emissions, const std::vector<std::uint8_t>& gold,
                                Tensor<T>* d_emissions) const {
  if (gold.size() != emissions.dim(0)) throw ShapeError("gold labels are not aligned with the sequence");
  if (cfg_.variant.prediction == Prediction::classification) return classification_nll(emissions, gold, d_emissions);
  if (!d_emissions) return crf_nll(emissions, gold, crf_params());
  CrfGrads<T> g;
  const T value = crf_nll(emissions, gold, crf_params(), &g);
  *d_emissions = std::move(g.emissions);
  return value;
}

template <typename T>
T Model<T>::loss(const Tensor<T>& windows, const std::vector<std::uint8_t>& gold, Grads<T>* grads,
                 Rng* dropout_rng) const {
  if (!grads) return loss_from_emissions(forward(windows, dropout_rng), gold, nullptr);
  Cache cache;
  const Tensor<T> emissions = forward(windows, dropout_rng, &cache);
  if (gold.size() != emissions.dim(0)) throw ShapeError("gold labels are not aligned with the sequence");
  Tensor<T> d_em;
  T value;
  if (cfg_.variant.prediction == Prediction::classification) {
    value = classification_nll(emissions, gold, &d_em);
  } else {
    CrfGrads<T> g;
    value = crf_nll(emissions, gold, crf_params(), &g);
    d_em = std::move(g.emissions);
    (*grads)[crf_transitions_] += g.transitions;
    (*grads)[crf_start_] += g.start;
    (*grads)[crf_end_] += g.end;
  }
  Tensor<T> du = head_.backward(params_, cache.head, d_em, *grads);
  Tensor<T> de = encoder_ ? encoder_->backward(params_, cache.encoder, du, *grads) : du;
  embedder_.backward(params_, graph_, cache.embed, de, *grads);
  return value;
}

template <typename T>
std::vector<std::uint8_t> Model<T>::decode(const Tensor<T>& emissions) const {
  if (cfg_.variant.prediction == Prediction::crf) return viterbi(emissions, crf_params()).labels;
  return argmax_labels(emissions);
}

template class Model<float>;
template class Model<double>;

}  // namespace gp
