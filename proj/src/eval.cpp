#include "eval.hpp"

#include <cmath>

#include "common.hpp"

namespace gp {

using nlohmann::json;

ClassMetrics ClassMetrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  m.precision = tp + fp == 0 ? 0.0 : d(tp) / d(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : d(tp) / d(tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * d(tp) / d(2 * tp + fp + fn);
  m.iou = tp + fp + fn == 0 ? 1.0 : d(tp) / d(tp + fp + fn);
  return m;
}

json ClassMetrics::to_json() const {
  return {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"precision", precision}, {"recall", recall}, {"f1", f1}, {"iou", iou}};
}

ClassMetrics per_class_metrics(std::span<const std::uint8_t> gold, std::span<const std::uint8_t> pred,
                               std::uint8_t target) {
  if (gold.size() != pred.size()) {
    throw ShapeError("gold and predicted label lists differ in length (" + std::to_string(gold.size()) + " vs " +
                     std::to_string(pred.size()) + ")");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool g = gold[i] == target, p = pred[i] == target;
    tp += g && p;
    fp += !g && p;
    fn += g && !p;
  }
  return ClassMetrics::from_counts(tp, fp, fn);
}

std::vector<UnitLabel> merge_to_units(std::span<const PhaseLabel> labels) {
  std::vector<UnitLabel> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] == PhaseLabel::N ? UnitLabel::N : UnitLabel::G;
  return out;
}

std::vector<std::vector<double>> confusion_matrix(std::span<const std::uint8_t> gold,
                                                  std::span<const std::uint8_t> pred, std::size_t labels) {
  if (gold.size() != pred.size()) throw ShapeError("gold and predicted label lists differ in length");
  std::vector<std::vector<double>> m(labels, std::vector<double>(labels, 0.0));
  std::vector<std::size_t> support(labels, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= labels || pred[i] >= labels) throw RangeError("label outside the confusion matrix");
    m[gold[i]][pred[i]] += 1.0;
    ++support[gold[i]];
  }
  for (std::size_t g = 0; g < labels; ++g) {
    if (support[g] == 0) continue;
    for (auto& v : m[g]) v /= static_cast<double>(support[g]);
  }
  return m;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw ContractError("mean_std of an empty list");
  MeanStd r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

std::map<std::string, double> EvalReport::scalars() const {
  std::map<std::string, double> out;
  auto put = [&](const std::string& prefix, const ClassMetrics& m) {
    out[prefix + ".precision"] = m.precision;
    out[prefix + ".recall"] = m.recall;
    out[prefix + ".f1"] = m.f1;
    out[prefix + ".iou"] = m.iou;
  };
  put("stroke", stroke);
  put("unit", unit);
  for (const auto& [name, m] : phases) put("phase." + name, m);
  return out;
}

json EvalReport::to_json() const {
  json j;
  j["variant"] = variant;
  j["labels"] = label_chars;
  j["test_subjects"] = test_subjects;
  j["windows"] = windows;
  j["stroke"] = stroke.to_json();
  j["unit"] = unit.to_json();
  json ph = json::object();
  for (const auto& [name, m] : phases) ph[name] = m.to_json();
  j["phases"] = ph;
  j["confusion"] = confusion;
  if (!transitions.empty()) j["transitions"] = transitions;
  return j;
}

EvalReport evaluate_predictions(std::span<const PhaseLabel> gold, std::span<const std::uint8_t> pred_codes,
                                std::size_t labels) {
  if (gold.size() != pred_codes.size()) throw ShapeError("gold and predicted label lists differ in length");
  if (labels != kNumPhases && labels != 2) throw RangeError("label scheme must have 4 or 2 labels");
  const bool multi = labels == kNumPhases;
  EvalReport r;
  r.label_chars = multi ? "PSRN" : "OS";
  r.windows = gold.size();
  std::vector<std::uint8_t> gold_codes(gold.size());
  std::vector<std::uint8_t> gold_units(gold.size()), pred_units(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) {
    gold_codes[i] = multi ? static_cast<std::uint8_t>(gold[i]) : static_cast<std::uint8_t>(to_binary(gold[i]));
    gold_units[i] = gold[i] == PhaseLabel::N ? 0 : 1;
    const bool pred_gesture = multi ? pred_codes[i] != static_cast<std::uint8_t>(PhaseLabel::N) : pred_codes[i] == 1;
    pred_units[i] = pred_gesture ? 1 : 0;
  }
  r.stroke = per_class_metrics(gold_codes, pred_codes, 1);
  r.unit = per_class_metrics(gold_units, pred_units, 1);
  if (multi) {
    for (PhaseLabel l : {PhaseLabel::P, PhaseLabel::S, PhaseLabel::R}) {
      r.phases[std::string(1, phase_char(l))] = per_class_metrics(gold_codes, pred_codes, static_cast<std::uint8_t>(l));
    }
  }
  r.confusion = confusion_matrix(gold_codes, pred_codes, labels);
  return r;
}

FoldAggregate aggregate_folds(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ContractError("aggregate_folds needs at least one report");
  FoldAggregate agg;
  agg.folds = reports.size();
  std::map<std::string, std::vector<double>> columns;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.scalars()) columns[k].push_back(v);
  }
  for (const auto& [k, vs] : columns) {
    if (vs.size() == reports.size()) agg.metrics[k] = mean_std(vs);
  }
  return agg;
}

json FoldAggregate::to_json() const {
  json j;
  j["folds"] = folds;
  json m = json::object();
  for (const auto& [k, v] : metrics) m[k] = {{"mean", v.mean}, {"std", v.std}};
  j["metrics"] = m;
  return j;
}

}  // namespace gp
