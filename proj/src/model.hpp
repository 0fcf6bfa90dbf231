#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crf.hpp"
#include "encoder.hpp"
#include "stgcn.hpp"
#include "windowing.hpp"

namespace gp {

enum class Labeling { multi_phase, binary };
enum class Prediction { crf, classification };

/// One of the eight labeling × prediction × encoder combinations.
struct ModelVariant {
  Labeling labeling = Labeling::multi_phase;
  Prediction prediction = Prediction::crf;
  bool encoder_present = true;

  std::size_t num_labels() const { return labeling == Labeling::multi_phase ? kNumPhases : 2; }
  /// Label code used by this variant's stroke class.
  static constexpr std::uint8_t stroke_code = 1;

  /// e.g. "multi-phase/crf/te", "binary/classification/no-te".
  std::string name() const;
  static ModelVariant parse(const std::string& name);
  static std::array<ModelVariant, 8> all();

  std::uint8_t code(PhaseLabel l) const {
    return labeling == Labeling::multi_phase ? static_cast<std::uint8_t>(l) : static_cast<std::uint8_t>(to_binary(l));
  }
  std::vector<std::uint8_t> codes(const std::vector<PhaseLabel>& labels) const;
  /// Single-character label names in code order.
  std::string label_chars() const { return labeling == Labeling::multi_phase ? "PSRN" : "OS"; }

  bool operator==(const ModelVariant&) const = default;
};

struct ModelConfig {
  StgcnConfig stgcn;
  EncoderConfig encoder;  // d_model follows the last st-gcn width
  std::size_t head_hidden = 64;
  ModelVariant variant;
  /// Per-channel (x, y, confidence) standardization applied to window
  /// features before the embedder; fitted on training data.
  std::array<double, kFeatureChannels> input_shift{0.0, 0.0, 0.0};
  std::array<double, kFeatureChannels> input_scale{1.0, 1.0, 1.0};

  void validate() const;
};

/// Mean and standard deviation of each feature channel over all windows.
void fit_input_standardization(ModelConfig& cfg, std::span<const WindowSequence* const> sequences);

/// ST-GCN embedder → Transformer encoder (or identity) → position-wise head
/// → CRF or per-position softmax.
template <typename T>
class Model {
 public:
  struct Cache {
    StgcnEmbedder::Cache<T> embed;
    Encoder::Cache<T> encoder;
    Head::Cache<T> head;
  };

  Model(ModelConfig cfg, StGraph graph);

  /// Draws every parameter from a generator seeded with `seed`.
  void init(std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const ModelVariant& variant() const { return cfg_.variant; }
  const StGraph& graph() const { return graph_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  std::size_t num_labels() const { return cfg_.variant.num_labels(); }
  const StgcnEmbedder& embedder() const { return embedder_; }
  const std::optional<Encoder>& encoder() const { return encoder_; }
  const Head& head() const { return head_; }

  /// Standardized (t, F, V, 3) feature tensor for a window sequence.
  Tensor<T> window_tensor(const WindowSequence& seq) const;

  /// Window embeddings e (t, d).
  Tensor<T> embed(const Tensor<T>& windows, Cache* cache = nullptr) const;

  /// Emission scores (t, labels). `dropout_rng` enables training-mode dropout.
  Tensor<T> forward(const Tensor<T>& windows, Rng* dropout_rng = nullptr, Cache* cache = nullptr) const;
  Tensor<T> forward_sequence(const WindowSequence& seq) const { return forward(window_tensor(seq)); }

  /// CRF NLL or mean cross-entropy. Accumulates parameter gradients into
  /// `grads` when non-null.
  T loss(const Tensor<T>& windows, const std::vector<std::uint8_t>& gold, Grads<T>* grads = nullptr,
         Rng* dropout_rng = nullptr) const;
  T loss_from_emissions(const Tensor<T>& emissions, const std::vector<std::uint8_t>& gold,
                        Tensor<T>* d_emissions) const;

  std::vector<std::uint8_t> decode(const Tensor<T>& emissions) const;
  std::vector<std::uint8_t> predict(const WindowSequence& seq) const { return decode(forward_sequence(seq)); }

  /// Current CRF scores; all zeros for classification variants.
  CrfParams<T> crf_params() const;

 private:
  ModelConfig cfg_;
  StGraph graph_;
  ParamSet<T> params_;
  StgcnEmbedder embedder_;
  std::optional<Encoder> encoder_;
  Head head_;
  std::size_t crf_transitions_ = 0, crf_start_ = 0, crf_end_ = 0;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace gp
