#include "pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "common.hpp"

namespace gp {

using nlohmann::json;

std::vector<std::string> FoldPlan::train_subjects(std::size_t fold) const {
  if (fold >= test_subjects.size()) throw RangeError("fold index out of range");
  std::vector<std::string> out;
  for (std::size_t f = 0; f < test_subjects.size(); ++f) {
    if (f == fold) continue;
    out.insert(out.end(), test_subjects[f].begin(), test_subjects[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

json FoldPlan::to_json() const { return test_subjects; }

FoldPlan make_folds(std::vector<std::string> subjects, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::sort(subjects.begin(), subjects.end());
  if (std::adjacent_find(subjects.begin(), subjects.end()) != subjects.end()) {
    throw ConfigError("subject list contains duplicates");
  }
  if (subjects.size() < k) {
    throw ConfigError(std::to_string(subjects.size()) + " subjects cannot fill " + std::to_string(k) + " folds");
  }
  Rng rng = Rng::derive(seed, 0xf01d);
  rng.shuffle(subjects);
  FoldPlan plan;
  plan.test_subjects.resize(k);
  for (std::size_t i = 0; i < subjects.size(); ++i) plan.test_subjects[i % k].push_back(subjects[i]);
  for (auto& f : plan.test_subjects) std::sort(f.begin(), f.end());
  return plan;
}

bool has_gesture(const WindowSequence& seq) {
  return std::any_of(seq.labels.begin(), seq.labels.end(), [](PhaseLabel l) { return l != PhaseLabel::N; });
}

std::vector<std::size_t> balance_epoch(std::span<const WindowSequence* const> sequences, std::uint64_t seed,
                                       std::size_t epoch) {
  std::vector<std::size_t> gesture, neutral;
  for (std::size_t i = 0; i < sequences.size(); ++i) (has_gesture(*sequences[i]) ? gesture : neutral).push_back(i);
  Rng rng = Rng::derive(seed, 0xba1a, epoch);
  rng.shuffle(neutral);
  neutral.resize(std::min(neutral.size(), gesture.size()));
  std::vector<std::size_t> out = gesture;
  out.insert(out.end(), neutral.begin(), neutral.end());
  std::sort(out.begin(), out.end());
  return out;
}

void TrainConfig::validate() const {
  schedule.validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("l2 weight must be non-negative");
  if (!(clip_norm >= 0.0)) throw ConfigError("gradient clip norm must be non-negative");
}

json EpochRecord::to_json() const {
  return {{"epoch", epoch}, {"lr", lr}, {"mean_loss", mean_loss}, {"sequences", sequences}, {"wall_time", wall_seconds}};
}

namespace {

void clip_gradients(nn::ParamSet<float>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& b : params) {
    for (float g : b.grad.values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const auto scale = static_cast<float>(max_norm / norm);
  for (auto& b : params) {
    for (float& g : b.grad.values()) g *= scale;
  }
}

}  // namespace

Model<float> train_model(const ModelConfig& model_cfg, const StGraph& graph, const TrainConfig& cfg,
                         std::span<const WindowSequence* const> train_set, const EpochCallback& on_epoch) {
  cfg.validate();
  std::vector<const WindowSequence*> pool;
  for (const auto* q : train_set) {
    if (!q->partial) pool.push_back(q);
  }
  ModelConfig mc = model_cfg;
  if (cfg.standardize_inputs && !pool.empty()) fit_input_standardization(mc, pool);
  Model<float> model(mc, graph);
  model.init(cfg.seed);
  if (cfg.schedule.total_epochs == 0) return model;
  if (pool.empty()) throw TooShortError("no full-length training sequences");

  std::vector<nn::Tensor<float>> inputs(pool.size());
  std::vector<std::vector<std::uint8_t>> gold(pool.size());
  parallel_for(pool.size(), cfg.jobs, [&](std::size_t i) {
    inputs[i] = model.window_tensor(*pool[i]);
    gold[i] = model.variant().codes(pool[i]->labels);
  });

  const bool crf_per_window = cfg.per_window_crf_loss && model.variant().prediction == Prediction::crf;
  auto& params = model.params();
  for (std::size_t epoch = 0; epoch < cfg.schedule.total_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = nn::lr_at(cfg.schedule, epoch);
    std::vector<std::size_t> order;
    if (cfg.balance) {
      order = balance_epoch(pool, cfg.seed, epoch);
    } else {
      order.resize(pool.size());
      std::iota(order.begin(), order.end(), 0);
    }
    Rng shuffler = Rng::derive(cfg.seed, 0x5417, epoch);
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, order.size() - start);
      std::vector<nn::Grads<float>> grads(b);
      std::vector<double> losses(b);
      parallel_for(b, cfg.jobs, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        Rng dropout = Rng::derive(cfg.seed, 0xd409 + epoch, start + k);
        grads[k] = model.params().make_grads();
        losses[k] = model.loss(inputs[idx], gold[idx], &grads[k], &dropout);
      });
      for (std::size_t k = 0; k < b; ++k) {
        if (!std::isfinite(losses[k])) {
          throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + " (lr " +
                                std::to_string(lr) + ", sequence " + pool[order[start + k]]->subject_id + ")");
        }
        const double scale = crf_per_window ? 1.0 / static_cast<double>(gold[order[start + k]].size()) : 1.0;
        loss_sum += losses[k] * scale;
        params.accumulate(grads[k], static_cast<float>(scale / static_cast<double>(b)));
      }
      if (cfg.clip_norm > 0.0) clip_gradients(params, cfg.clip_norm);
      nn::sgd_step(params, lr, cfg.l2);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.sequences = order.size();
    rec.mean_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_epoch) on_epoch(rec);
  }
  for (const auto& blk : params) {
    if (!blk.value.all_finite()) throw DivergenceError("parameter block " + blk.name + " became non-finite");
  }
  return model;
}

std::vector<const WindowSequence*> training_sequences(const PreparedDataset& ds, std::span<const std::string> subjects) {
  std::vector<const WindowSequence*> out;
  for (const auto& id : subjects) {
    for (const auto& q : ds.subject(id).sequences) {
      if (!q.partial) out.push_back(&q);
    }
  }
  return out;
}

EvalReport evaluate_model(const Model<float>& model, const PreparedDataset& ds, std::span<const std::string> subjects,
                          unsigned jobs) {
  std::vector<const WindowSequence*> seqs;
  for (const auto& id : subjects) {
    for (const auto& q : ds.subject(id).sequences) seqs.push_back(&q);
  }
  std::vector<std::vector<std::uint8_t>> preds(seqs.size());
  parallel_for(seqs.size(), jobs, [&](std::size_t i) { preds[i] = model.predict(*seqs[i]); });
  std::vector<PhaseLabel> gold;
  std::vector<std::uint8_t> pred;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    gold.insert(gold.end(), seqs[i]->labels.begin(), seqs[i]->labels.end());
    pred.insert(pred.end(), preds[i].begin(), preds[i].end());
  }
  EvalReport r = evaluate_predictions(gold, pred, model.num_labels());
  r.variant = model.variant().name();
  r.test_subjects.assign(subjects.begin(), subjects.end());
  if (model.variant().prediction == Prediction::crf) {
    const auto crf = model.crf_params();
    const std::size_t L = crf.labels();
    r.transitions.assign(L, std::vector<double>(L));
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) r.transitions[a][b] = crf.transitions.at(a, b);
    }
  }
  return r;
}

FoldAggregate CrossvalResult::aggregate(const std::string& variant) const {
  auto it = reports.find(variant);
  if (it == reports.end()) throw ContractError("no reports for variant " + variant);
  return aggregate_folds(it->second);
}

json CrossvalResult::to_json(const std::string& config_hash, std::uint64_t seed) const {
  json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["iou_definition"] = "window-level Jaccard index tp / (tp + fp + fn)";
  j["fold_plan"] = plan.to_json();
  json vs = json::object();
  for (const auto& v : variants) {
    const auto& reps = reports.at(v.name());
    json folds = json::array();
    for (const auto& r : reps) folds.push_back(r.to_json());
    vs[v.name()] = {{"folds", folds}, {"aggregate", aggregate(v.name()).to_json()}};
  }
  j["variants"] = vs;
  return j;
}

CrossvalResult cross_validate(const PreparedDataset& ds, const StGraph& graph, const CrossvalOptions& options,
                              const CrossvalLog& log) {
  if (options.variants.empty()) throw ConfigError("no model variants selected");
  CrossvalResult result;
  result.plan = make_folds(ds.subject_ids(), options.folds, options.seed);
  result.variants = options.variants;
  for (std::size_t fold = 0; fold < result.plan.size(); ++fold) {
    const auto train_ids = result.plan.train_subjects(fold);
    const auto train_set = training_sequences(ds, train_ids);
    for (const auto& v : options.variants) {
      ModelConfig mc = options.model;
      mc.variant = v;
      TrainConfig tc = options.train;
      tc.seed = splitmix64(options.seed + fold);
      EpochCallback cb;
      if (log) cb = [&](const EpochRecord& r) { log(v.name(), fold, r); };
      const Model<float> model = train_model(mc, graph, tc, train_set, cb);
      result.reports[v.name()].push_back(evaluate_model(model, ds, result.plan.test_subjects[fold], options.train.jobs));
    }
  }
  return result;
}

std::vector<GestureUnit> extract_units(std::span<const std::size_t> window_starts, std::span<const std::uint8_t> codes,
                                       const ModelVariant& variant, std::size_t window_len, std::size_t stride) {
  if (window_starts.size() != codes.size()) throw ShapeError("window and label counts differ");
  if (stride == 0 || stride > window_len) throw RangeError("stride must lie in [1, window length]");
  const std::string chars = variant.label_chars();
  const bool multi = variant.labeling == Labeling::multi_phase;
  const auto in_unit = [&](std::uint8_t c) {
    return multi ? c != static_cast<std::uint8_t>(PhaseLabel::N) : c == ModelVariant::stroke_code;
  };
  const std::size_t offset = (window_len - stride) / 2;
  std::vector<GestureUnit> units;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= chars.size()) throw RangeError("label code outside the variant's scheme");
    if (!in_unit(codes[i])) continue;
    const std::size_t lo = window_starts[i] + offset, hi = lo + stride;
    const bool contiguous = i > 0 && in_unit(codes[i - 1]) && window_starts[i - 1] + stride == window_starts[i];
    if (!contiguous) units.push_back({lo, hi, i, i, {}});
    GestureUnit& u = units.back();
    u.end_frame = hi;
    u.last_window = i;
    if (!u.phases.empty() && u.phases.back().label == chars[codes[i]] && contiguous) {
      u.phases.back().end_frame = hi;
    } else {
      u.phases.push_back({chars[codes[i]], lo, hi});
    }
  }
  return units;
}

}  // namespace gp
