#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "eval.hpp"
#include "model.hpp"

namespace gp {

/// Subject-disjoint folds: a seeded shuffle of the subjects dealt out
/// round-robin, so fold sizes differ by at most one.
struct FoldPlan {
  std::vector<std::vector<std::string>> test_subjects;

  std::size_t size() const { return test_subjects.size(); }
  std::vector<std::string> train_subjects(std::size_t fold) const;
  nlohmann::json to_json() const;
};

FoldPlan make_folds(std::vector<std::string> subjects, std::size_t k, std::uint64_t seed);

/// True when any window of the sequence carries a P, S or R label.
bool has_gesture(const WindowSequence& seq);

/// Indices of all gesture sequences plus an equal number (or all, if fewer
/// exist) of all-neutral ones, drawn afresh per epoch.
std::vector<std::size_t> balance_epoch(std::span<const WindowSequence* const> sequences, std::uint64_t seed,
                                       std::size_t epoch);

struct TrainConfig {
  nn::LrSchedule schedule;  // total_epochs is the epoch count
  std::size_t batch_size = 16;
  double l2 = 1e-4;
  bool balance = true;
  double clip_norm = 0.0;  // global gradient-norm cap; 0 disables
  bool standardize_inputs = true;
  /// Divide each sequence's CRF NLL by its length so it matches the
  /// per-window scale of the classification loss.
  bool per_window_crf_loss = true;
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  std::size_t sequences = 0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD on full-length sequences. Per-sequence gradients are
/// reduced in batch order so results do not depend on `jobs`. Zero epochs
/// returns the seeded initialization. Throws DivergenceError when a loss
/// turns non-finite.
Model<float> train_model(const ModelConfig& model_cfg, const StGraph& graph, const TrainConfig& cfg,
                         std::span<const WindowSequence* const> train_set, const EpochCallback& on_epoch = {});

/// Full-length training sequences of the named subjects.
std::vector<const WindowSequence*> training_sequences(const PreparedDataset& ds, std::span<const std::string> subjects);

/// Scores the model on every sequence (partial ones included) of the named
/// subjects against the stored multi-phase labels.
EvalReport evaluate_model(const Model<float>& model, const PreparedDataset& ds, std::span<const std::string> subjects,
                          unsigned jobs = 1);

struct CrossvalOptions {
  std::size_t folds = 5;
  std::vector<ModelVariant> variants;
  ModelConfig model;  // variant field is overridden per run
  TrainConfig train;
  std::uint64_t seed = 0;
};

struct CrossvalResult {
  FoldPlan plan;
  std::vector<ModelVariant> variants;
  std::map<std::string, std::vector<EvalReport>> reports;  // keyed by variant name

  FoldAggregate aggregate(const std::string& variant) const;
  /// Deterministic report: no timings, fixed key order.
  nlohmann::json to_json(const std::string& config_hash, std::uint64_t seed) const;
};

using CrossvalLog = std::function<void(const std::string& variant, std::size_t fold, const EpochRecord&)>;

CrossvalResult cross_validate(const PreparedDataset& ds, const StGraph& graph, const CrossvalOptions& options,
                              const CrossvalLog& log = {});

struct PhaseSpan {
  char label = 'N';
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
};

struct GestureUnit {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  std::size_t first_window = 0;
  std::size_t last_window = 0;  // inclusive
  std::vector<PhaseSpan> phases;
};

/// Window i owns the stride-wide frame slice around its center. Runs of
/// non-neutral windows become units; runs of equal labels inside a unit
/// become phase spans. For binary variants units are S runs.
std::vector<GestureUnit> extract_units(std::span<const std::size_t> window_starts,
                                       std::span<const std::uint8_t> codes, const ModelVariant& variant,
                                       std::size_t window_len, std::size_t stride);

}  // namespace gp
