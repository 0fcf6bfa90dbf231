#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "dataset.hpp"
#include "gradcheck_suite.hpp"
#include "nn/params.hpp"
#include "pipeline.hpp"
#include "synth.hpp"

namespace gp::cmd {

using nlohmann::json;

namespace {

constexpr const char* kModelFormat = "gesturephase.model/1";

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create " + p.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json stamp(const std::string& hash, std::uint64_t seed) { return {{"config_hash", hash}, {"seed", seed}}; }

// Windowing of the data must match the configuration the model expects.
void check_windowing(const PreparedDataset& ds, const PrepareOptions& want, const fs::path& dir) {
  const auto& got = ds.options;
  if (got.window_len != want.window_len || got.stride != want.stride || got.seq_len != want.seq_len) {
    throw CompatibilityError(dir.string() + " was prepared with window " + std::to_string(got.window_len) + "/stride " +
                             std::to_string(got.stride) + "/sequence " + std::to_string(got.seq_len) +
                             ", configuration expects " + std::to_string(want.window_len) + "/" +
                             std::to_string(want.stride) + "/" + std::to_string(want.seq_len));
  }
}

std::vector<std::string> pick_subjects(const PreparedDataset& ds, const std::vector<std::string>& requested) {
  if (requested.empty()) return ds.subject_ids();
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& id : requested) {
    ds.subject(id);
    if (seen.insert(id).second) out.push_back(id);
  }
  return out;
}

std::string pct(const json& ms) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%5.1f ± %4.1f", 100.0 * ms.at("mean").get<double>(),
                100.0 * ms.at("std").get<double>());
  return buf;
}

}  // namespace

void save_model(const fs::path& dir, const Model<float>& model, const RunConfig& config,
                const JointSelection& selection) {
  ensure_dir(dir);
  RunConfig rc = config;
  rc.model.variant = model.variant();
  const auto& mc = model.config();
  nn::CheckpointMeta meta;
  meta.seed = config.seed;
  meta.config = {{"format", kModelFormat},
                 {"config_hash", rc.hash()},
                 {"run", rc.to_json()},
                 {"input_shift", mc.input_shift},
                 {"input_scale", mc.input_scale},
                 {"graph_hash", model.graph().hash()}};
  nn::save_checkpoint(dir, model.params(), meta);
  model.graph().save(dir / "graph.json");
  selection.save(dir / "joint_selection.json");
}

LoadedModel load_model(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("model directory " + dir.string() + " does not exist");
  const json manifest = nn::read_checkpoint_manifest(dir);
  LoadedModel lm;
  ModelConfig mc;
  try {
    const json& c = manifest.at("config");
    if (c.value("format", "") != kModelFormat) throw CompatibilityError("unknown model format in " + dir.string());
    lm.config = RunConfig::from_json(c.at("run"));
    lm.config_hash = c.at("config_hash").get<std::string>();
    mc = lm.config.model;
    mc.input_shift = c.at("input_shift").get<std::array<double, kFeatureChannels>>();
    mc.input_scale = c.at("input_scale").get<std::array<double, kFeatureChannels>>();
    mc.validate();
    StGraph graph = StGraph::load(dir / "graph.json");
    if (graph.hash() != c.at("graph_hash").get<std::string>()) {
      throw CompatibilityError(dir.string() + ": graph.json does not match the graph the model was trained on");
    }
    lm.selection = JointSelection::load(dir / "joint_selection.json");
    lm.selection.validate();
    lm.model = std::make_unique<Model<float>>(mc, std::move(graph));
  } catch (const json::exception& e) {
    throw CompatibilityError(dir.string() + ": malformed model manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw CompatibilityError(dir.string() + ": model configuration rejected: " + e.what());
  }
  nn::load_checkpoint(dir, lm.model->params());
  return lm;
}

json synth(const RunConfig& config, const fs::path& out_dir, const Log& log) {
  const SynthConfig sc = config.synth_config();
  const SynthCorpus corpus = generate(sc);
  write_corpus(out_dir, corpus, config.joint_selection());
  std::size_t frames = 0;
  for (const auto& s : corpus.sequences) frames += s.size();
  json j = stamp(config.hash(), config.seed);
  j["synth"] = sc.to_json();
  j["subjects"] = corpus.sequences.size();
  j["gestures"] = corpus.truth.gesture_count();
  j["frames"] = frames;
  write_text(out_dir / "manifest.json", j.dump(2) + "\n");
  say(log, "wrote " + std::to_string(corpus.sequences.size()) + " subjects with " +
               std::to_string(corpus.truth.gesture_count()) + " gestures to " + out_dir.string());
  j["out_dir"] = out_dir.string();
  return j;
}

json prepare(const RunConfig& config, const fs::path& poses_dir, const fs::path& annotations, const fs::path& out_dir,
             const Log& log) {
  const auto raw = load_pose_directory(poses_dir, config.joint_selection());
  AnnotationMap ann;
  if (!annotations.empty()) ann = parse_annotation_file(annotations);
  std::set<std::string> known;
  for (const auto& s : raw) known.insert(s.subject_id);
  for (const auto& [id, strokes] : ann) {
    if (!known.count(id)) say(log, "warning: annotations for subject " + id + " have no pose file");
  }
  PreparedDataset ds = prepare_dataset(raw, ann, config.data, config.hash());
  ds.seed = config.seed;
  save_prepared(out_dir, ds);
  const auto dist = ds.distribution();
  say(log, format_label_distribution(dist));
  json j = stamp(config.hash(), config.seed);
  j["subjects"] = ds.subjects.size();
  j["windows"] = dist.total();
  j["out_dir"] = out_dir.string();
  return j;
}

json train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir,
           const std::vector<std::string>& subjects, const Log& log) {
  const PreparedDataset ds = load_prepared(data_dir);
  check_windowing(ds, config.data, data_dir);
  const auto ids = pick_subjects(ds, subjects);
  const auto train_set = training_sequences(ds, ids);
  if (train_set.empty()) throw TooShortError("no full-length training sequences in " + data_dir.string());

  const std::string hash = config.hash();
  ensure_dir(out_dir);
  std::ofstream epoch_log(out_dir / "train_log.jsonl", std::ios::trunc);
  if (!epoch_log) throw IoError("cannot write " + (out_dir / "train_log.jsonl").string());
  double last_loss = 0.0;
  const auto on_epoch = [&](const EpochRecord& r) {
    json line = r.to_json();
    line["config_hash"] = hash;
    line["seed"] = config.seed;
    epoch_log << line.dump() << "\n";
    epoch_log.flush();
    last_loss = r.mean_loss;
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %zu lr %.4g loss %.5f (%.1fs)", r.epoch, r.lr, r.mean_loss, r.wall_seconds);
    say(log, buf);
  };
  const Model<float> model = train_model(config.model, config.graph(), config.train_config(), train_set, on_epoch);
  save_model(out_dir, model, config, config.joint_selection());

  json j = stamp(hash, config.seed);
  j["variant"] = model.variant().name();
  j["train_subjects"] = ids;
  j["sequences"] = train_set.size();
  j["epochs"] = config.train.schedule.total_epochs;
  j["final_loss"] = last_loss;
  j["checkpoint"] = out_dir.string();
  return j;
}

json evaluate(const LoadedModel& lm, const fs::path& data_dir, const fs::path& out_file, unsigned jobs,
              const std::vector<std::string>& subjects, const Log& log) {
  const PreparedDataset ds = load_prepared(data_dir);
  check_windowing(ds, lm.config.data, data_dir);
  const auto ids = pick_subjects(ds, subjects);
  const EvalReport r = evaluate_model(*lm.model, ds, ids, jobs == 0 ? 1 : jobs);
  json j = stamp(lm.config_hash, lm.config.seed);
  j["report"] = r.to_json();
  if (!out_file.empty()) write_text(out_file, j.dump(2) + "\n");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s: stroke F1 %.3f IoU %.3f, unit F1 %.3f over %zu windows", r.variant.c_str(),
                r.stroke.f1, r.stroke.iou, r.unit.f1, r.windows);
  say(log, buf);
  return j;
}

json crossval(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir, const Log& log) {
  const PreparedDataset ds = load_prepared(data_dir);
  check_windowing(ds, config.data, data_dir);
  CrossvalOptions opts;
  opts.folds = config.folds;
  opts.variants = config.variants_for_crossval();
  opts.model = config.model;
  opts.train = config.train_config();
  opts.seed = config.seed;

  const std::string hash = config.hash();
  ensure_dir(out_dir);
  std::ofstream epoch_log(out_dir / "log.jsonl", std::ios::trunc);
  if (!epoch_log) throw IoError("cannot write " + (out_dir / "log.jsonl").string());
  const auto on_epoch = [&](const std::string& variant, std::size_t fold, const EpochRecord& r) {
    json line = r.to_json();
    line["variant"] = variant;
    line["fold"] = fold;
    line["config_hash"] = hash;
    line["seed"] = config.seed;
    epoch_log << line.dump() << "\n";
    epoch_log.flush();
    char buf[192];
    std::snprintf(buf, sizeof buf, "%s fold %zu epoch %zu loss %.5f (%.1fs)", variant.c_str(), fold, r.epoch,
                  r.mean_loss, r.wall_seconds);
    say(log, buf);
  };
  const CrossvalResult result = cross_validate(ds, config.graph(), opts, on_epoch);
  json report = result.to_json(hash, config.seed);
  report["data_config_hash"] = ds.config_hash;
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  const std::string table = format_aggregate_table(report);
  write_text(out_dir / "summary.txt", table);
  say(log, table);

  json j = stamp(hash, config.seed);
  j["report"] = (out_dir / "report.json").string();
  json agg = json::object();
  for (const auto& v : result.variants) {
    const auto a = result.aggregate(v.name());
    const auto& m = a.metrics.at("stroke.f1");
    agg[v.name()] = {{"stroke_f1_mean", m.mean}, {"stroke_f1_std", m.std}};
  }
  j["aggregate"] = agg;
  return j;
}

json predict_sequence(const LoadedModel& lm, const SkeletonSequence& raw) {
  const auto& opts = lm.config.data;
  const SubjectData sd = prepare_subject(raw, {}, opts);
  const Model<float>& model = *lm.model;
  const std::string chars = model.variant().label_chars();
  std::vector<std::size_t> starts;
  std::vector<std::uint8_t> codes;
  for (const auto& seq : sd.sequences) {
    const auto pred = model.predict(seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      starts.push_back(seq.windows[i].start_frame);
      codes.push_back(pred[i]);
    }
  }
  json windows = json::array();
  for (std::size_t i = 0; i < codes.size(); ++i) {
    windows.push_back({{"start_frame", starts[i]}, {"label", std::string(1, chars[codes[i]])}});
  }
  json units = json::array();
  for (const auto& u : extract_units(starts, codes, model.variant(), opts.window_len, opts.stride)) {
    json phases = json::array();
    for (const auto& p : u.phases) {
      phases.push_back({{"label", std::string(1, p.label)}, {"start_frame", p.start_frame}, {"end_frame", p.end_frame}});
    }
    units.push_back({{"start_frame", u.start_frame},
                     {"end_frame", u.end_frame},
                     {"first_window", u.first_window},
                     {"last_window", u.last_window},
                     {"phases", phases}});
  }
  json j = stamp(lm.config_hash, lm.config.seed);
  j["subject_id"] = raw.subject_id;
  j["variant"] = model.variant().name();
  j["window_len"] = opts.window_len;
  j["stride"] = opts.stride;
  j["windows"] = windows;
  j["units"] = units;
  return j;
}

json predict(const LoadedModel& lm, const fs::path& poses_file, const fs::path& out_file, const Log& log) {
  const SkeletonSequence raw = parse_pose_file(poses_file, lm.selection);
  json j = predict_sequence(lm, raw);
  if (!out_file.empty()) write_text(out_file, j.dump(2) + "\n");
  say(log, raw.subject_id + ": " + std::to_string(j["windows"].size()) + " windows, " +
               std::to_string(j["units"].size()) + " gesture units");
  return j;
}

json gradcheck(const RunConfig& config, std::size_t seeds, const fs::path& out_file, const Log& log) {
  if (seeds == 0) throw RangeError("gradcheck needs at least one seed");
  const GradCheckSuiteResult r = run_gradcheck_suite(seeds, config.seed);
  json j = stamp(config.hash(), config.seed);
  j.update(r.to_json());
  for (const auto& [layer, e] : j["layers"].items()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %s max rel err %.3e over %d seeds%s", layer.c_str(),
                  e["passed"].get<bool>() ? "ok  " : "FAIL", e["max_rel_error"].get<double>(), e["seeds"].get<int>(),
                  e["gating"].get<bool>() ? "" : " (reported only)");
    say(log, buf);
  }
  if (!out_file.empty()) write_text(out_file, j.dump(2) + "\n");
  return j;
}

std::string format_aggregate_table(const json& report) {
  static const std::vector<std::pair<std::string, std::string>> cols = {
      {"stroke.f1", "stroke F1"}, {"stroke.iou", "stroke IoU"}, {"unit.f1", "unit F1"}, {"unit.iou", "unit IoU"}};
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-32s", "variant");
  out << buf;
  for (const auto& [key, title] : cols) {
    std::snprintf(buf, sizeof buf, "  %-14s", title.c_str());
    out << buf;
  }
  out << "\n";
  for (const auto& [name, v] : report.at("variants").items()) {
    const auto& m = v.at("aggregate").at("metrics");
    std::snprintf(buf, sizeof buf, "%-32s", name.c_str());
    out << buf;
    for (const auto& [key, title] : cols) out << "  " << pct(m.at(key)) << "  ";
    out << "\n";
  }
  out << "mean ± sample std over " << report.at("fold_plan").size() << " folds, in percent; config "
      << report.at("config_hash").get<std::string>() << ", seed " << report.at("seed").get<std::uint64_t>() << "\n";
  return out.str();
}

}  // namespace gp::cmd
