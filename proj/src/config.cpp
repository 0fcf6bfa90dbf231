#include "config.hpp"

#include <fstream>
#include <set>

#include "common.hpp"

namespace gp {

using nlohmann::json;

namespace {

// Reads keys of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) throw ConfigError(label() + " must be an object");
  }

  Section sub(const char* key) {
    const json* v = find(key);
    return Section(v, path_.empty() ? key : path_ + "." + key);
  }

  void get(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(name(key) + " must be a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void get(const char* key, unsigned& out) {
    std::size_t v = out;
    get(key, v);
    out = static_cast<unsigned>(v);
  }
  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(name(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(name(key) + " must be true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(name(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(name(key) + " must be an array of integers");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_number_unsigned()) throw ConfigError(name(key) + " must be an array of non-negative integers");
        out.push_back(e.get<std::size_t>());
      }
    }
  }
  void get(const char* key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(name(key) + " must be an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError(name(key) + " must be an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }

  void finish() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) throw ConfigError("unknown configuration key '" + name(k.c_str()) + "'");
    }
  }

 private:
  const json* find(const char* key) {
    if (!j_) return nullptr;
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string labeling_name(Labeling l) { return l == Labeling::multi_phase ? "multi-phase" : "binary"; }
std::string prediction_name(Prediction p) { return p == Prediction::crf ? "crf" : "classification"; }

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  Section root(&j, "");
  root.get("seed", c.seed);
  root.get("jobs", c.jobs);

  {
    Section s = root.sub("data");
    s.get("window_len", c.data.window_len);
    s.get("stride", c.data.stride);
    s.get("seq_len", c.data.seq_len);
    s.get("normalize", c.data.normalize);
    s.get("center_joint", c.data.center_joint);
    std::vector<std::size_t> pair = {c.data.scale_pair.first, c.data.scale_pair.second};
    s.get("scale_pair", pair);
    if (pair.size() != 2) throw ConfigError("data.scale_pair must hold two joint indices");
    c.data.scale_pair = {pair[0], pair[1]};
    s.get("joint_selection", c.joint_selection_file);
    s.get("graph", c.graph_file);
    s.finish();
  }
  {
    Section s = root.sub("model");
    s.get("channels", c.model.stgcn.channels);
    s.get("temporal_kernel", c.model.stgcn.temporal_kernel);
    std::string act = nn::to_string(c.model.stgcn.activation);
    s.get("activation", act);
    c.model.stgcn.activation = nn::parse_activation(act);
    s.get("heads", c.model.encoder.heads);
    s.get("ffn_dim", c.model.encoder.ffn_dim);
    s.get("layers", c.model.encoder.layers);
    s.get("max_len", c.model.encoder.max_len);
    std::string pos = to_string(c.model.encoder.positional);
    s.get("positional", pos);
    c.model.encoder.positional = parse_positional(pos);
    s.get("dropout", c.model.encoder.dropout);
    s.get("head_hidden", c.model.head_hidden);
    s.finish();
    if (!c.model.stgcn.channels.empty()) c.model.encoder.d_model = c.model.stgcn.embed_dim();
  }
  {
    Section s = root.sub("variant");
    std::string labeling = labeling_name(c.model.variant.labeling);
    std::string prediction = prediction_name(c.model.variant.prediction);
    s.get("labeling", labeling);
    s.get("prediction", prediction);
    s.get("encoder", c.model.variant.encoder_present);
    s.finish();
    if (labeling == "multi-phase") {
      c.model.variant.labeling = Labeling::multi_phase;
    } else if (labeling == "binary") {
      c.model.variant.labeling = Labeling::binary;
    } else {
      throw ConfigError("variant.labeling must be 'multi-phase' or 'binary'");
    }
    if (prediction == "crf") {
      c.model.variant.prediction = Prediction::crf;
    } else if (prediction == "classification") {
      c.model.variant.prediction = Prediction::classification;
    } else {
      throw ConfigError("variant.prediction must be 'crf' or 'classification'");
    }
  }
  {
    Section s = root.sub("train");
    auto& sch = c.train.schedule;
    s.get("base_lr", sch.base_lr);
    s.get("warmup_epochs", sch.warmup_epochs);
    s.get("decay_epoch", sch.decay_epoch);
    s.get("decay_factor", sch.decay_factor);
    s.get("epochs", sch.total_epochs);
    s.get("batch_size", c.train.batch_size);
    s.get("l2", c.train.l2);
    s.get("balance", c.train.balance);
    s.get("clip_norm", c.train.clip_norm);
    s.get("standardize_inputs", c.train.standardize_inputs);
    s.get("per_window_crf_loss", c.train.per_window_crf_loss);
    s.finish();
  }
  {
    Section s = root.sub("crossval");
    s.get("folds", c.folds);
    std::vector<std::string> names;
    s.get("variants", names);
    for (const auto& n : names) c.crossval_variants.push_back(ModelVariant::parse(n));
    s.finish();
  }
  {
    Section s = root.sub("synth");
    s.get("n_subjects", c.synth.n_subjects);
    s.get("frames_per_subject", c.synth.frames_per_subject);
    s.get("gesture_rate", c.synth.gesture_rate);
    s.get("prep_mean", c.synth.prep_mean);
    s.get("stroke_mean", c.synth.stroke_mean);
    s.get("retr_mean", c.synth.retr_mean);
    s.get("noise_sigma", c.synth.noise_sigma);
    s.get("fps", c.synth.fps);
    s.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["data"] = {{"window_len", data.window_len},
               {"stride", data.stride},
               {"seq_len", data.seq_len},
               {"normalize", data.normalize},
               {"center_joint", data.center_joint},
               {"scale_pair", {data.scale_pair.first, data.scale_pair.second}},
               {"joint_selection", joint_selection_file},
               {"graph", graph_file}};
  j["model"] = {{"channels", model.stgcn.channels},
                {"temporal_kernel", model.stgcn.temporal_kernel},
                {"activation", nn::to_string(model.stgcn.activation)},
                {"heads", model.encoder.heads},
                {"ffn_dim", model.encoder.ffn_dim},
                {"layers", model.encoder.layers},
                {"max_len", model.encoder.max_len},
                {"positional", gp::to_string(model.encoder.positional)},
                {"dropout", model.encoder.dropout},
                {"head_hidden", model.head_hidden}};
  j["variant"] = {{"labeling", labeling_name(model.variant.labeling)},
                  {"prediction", prediction_name(model.variant.prediction)},
                  {"encoder", model.variant.encoder_present}};
  const auto& sch = train.schedule;
  j["train"] = {{"base_lr", sch.base_lr},
                {"warmup_epochs", sch.warmup_epochs},
                {"decay_epoch", sch.decay_epoch},
                {"decay_factor", sch.decay_factor},
                {"epochs", sch.total_epochs},
                {"batch_size", train.batch_size},
                {"l2", train.l2},
                {"balance", train.balance},
                {"clip_norm", train.clip_norm},
                {"standardize_inputs", train.standardize_inputs},
                {"per_window_crf_loss", train.per_window_crf_loss}};
  std::vector<std::string> names;
  for (const auto& v : crossval_variants) names.push_back(v.name());
  j["crossval"] = {{"folds", folds}, {"variants", names}};
  j["synth"] = {{"n_subjects", synth.n_subjects},   {"frames_per_subject", synth.frames_per_subject},
                {"gesture_rate", synth.gesture_rate}, {"prep_mean", synth.prep_mean},
                {"stroke_mean", synth.stroke_mean},   {"retr_mean", synth.retr_mean},
                {"noise_sigma", synth.noise_sigma},   {"fps", synth.fps}};
  return j;
}

std::string RunConfig::hash() const {
  json j = to_json();
  j.erase("jobs");
  return hex64(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
  data.validate();
  if (model.stgcn.channels.empty()) throw ConfigError("model.channels must not be empty");
  if (model.stgcn.temporal_kernel == 0 || model.stgcn.temporal_kernel % 2 == 0) {
    throw ConfigError("model.temporal_kernel must be odd");
  }
  model.validate();
  if (model.encoder.max_len < data.seq_len) throw ConfigError("model.max_len must cover data.seq_len");
  train.validate();
  if (folds < 2) throw ConfigError("crossval.folds must be at least 2");
  synth.validate();
}

JointSelection RunConfig::joint_selection() const {
  if (joint_selection_file.empty()) return JointSelection::whole_body_default();
  auto sel = JointSelection::load(joint_selection_file);
  sel.validate();
  return sel;
}

StGraph RunConfig::graph() const {
  return graph_file.empty() ? StGraph::upper_body_default() : StGraph::load(graph_file);
}

std::vector<ModelVariant> RunConfig::variants_for_crossval() const {
  if (!crossval_variants.empty()) return crossval_variants;
  const auto all = ModelVariant::all();
  return {all.begin(), all.end()};
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.jobs = jobs;
  return t;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s = synth;
  s.seed = seed;
  return s;
}

}  // namespace gp
