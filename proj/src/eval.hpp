#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "windowing.hpp"

namespace gp {

/// Window-level counts for one class. Zero denominators give 0 for
/// precision/recall/F1; IoU of a class absent from gold and prediction is 1.
struct ClassMetrics {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, iou = 0.0;

  static ClassMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
  nlohmann::json to_json() const;
};

ClassMetrics per_class_metrics(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> pred,
                               std::uint8_t target);

enum class UnitLabel : std::uint8_t { N = 0, G = 1 };

/// P, S and R collapse into one gesture-unit label.
std::vector<UnitLabel> merge_to_units(std::span<const PhaseLabel> labels);

/// Row-normalized gold × predicted matrix; rows without support are zero.
std::vector<std::vector<double>> confusion_matrix(std::span<const std::uint8_t> gold,
                                                  std::span<const std::uint8_t> pred, std::size_t labels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

/// Evaluation of one model variant on one test fold.
struct EvalReport {
  std::string variant;
  std::string label_chars;  // label names in code order
  std::vector<std::string> test_subjects;
  std::size_t windows = 0;
  ClassMetrics stroke;
  ClassMetrics unit;
  std::map<std::string, ClassMetrics> phases;  // P, S, R for multi-phase variants
  std::vector<std::vector<double>> confusion;
  std::vector<std::vector<double>> transitions;  // CRF variants only

  /// Flat metric map ("stroke.f1", "unit.iou", "phase.P.f1", ...).
  std::map<std::string, double> scalars() const;
  nlohmann::json to_json() const;
};

/// Scores variant-space predictions against multi-phase gold labels.
/// `gold` and `pred_codes` are aligned window by window; `labels` is the
/// variant's label count (4 multi-phase, 2 binary).
EvalReport evaluate_predictions(std::span<const PhaseLabel> gold, std::span<const std::uint8_t> pred_codes,
                                std::size_t labels);

struct FoldAggregate {
  std::size_t folds = 0;
  std::map<std::string, MeanStd> metrics;

  nlohmann::json to_json() const;
};

/// Mean ± sample std of every scalar metric across folds.
FoldAggregate aggregate_folds(std::span<const EvalReport> reports);

}  // namespace gp
