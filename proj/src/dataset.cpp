#include "dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <set>

#include "common.hpp"

namespace gp {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "frame files are written in host byte order");

namespace {

constexpr const char* kFormat = "gesturephase.prepared/1";

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("write failed for " + p.string());
}

std::string labels_string(const std::vector<PhaseLabel>& labels) {
  std::string s;
  s.reserve(labels.size());
  for (auto l : labels) s.push_back(phase_char(l));
  return s;
}

std::string subject_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%04zu", i);
  return buf;
}

}  // namespace

void PrepareOptions::validate() const {
  if (window_len == 0 || stride == 0 || seq_len == 0) throw ConfigError("window length, stride and sequence length must be positive");
  if (center_joint >= kNumJoints || scale_pair.first >= kNumJoints || scale_pair.second >= kNumJoints) {
    throw ConfigError("normalization joints must be below " + std::to_string(kNumJoints));
  }
  if (scale_pair.first == scale_pair.second) throw ConfigError("normalization scale pair needs two distinct joints");
}

json PrepareOptions::to_json() const {
  return {{"window_len", window_len},
          {"stride", stride},
          {"seq_len", seq_len},
          {"normalize", normalize},
          {"center_joint", center_joint},
          {"scale_pair", {scale_pair.first, scale_pair.second}}};
}

PrepareOptions PrepareOptions::from_json(const json& j) {
  PrepareOptions o;
  try {
    o.window_len = j.at("window_len").get<std::size_t>();
    o.stride = j.at("stride").get<std::size_t>();
    o.seq_len = j.at("seq_len").get<std::size_t>();
    o.normalize = j.at("normalize").get<bool>();
    o.center_joint = j.at("center_joint").get<std::size_t>();
    const auto& sp = j.at("scale_pair");
    o.scale_pair = {sp.at(0).get<std::size_t>(), sp.at(1).get<std::size_t>()};
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad windowing options: ") + e.what());
  }
  o.validate();
  return o;
}

std::vector<std::string> PreparedDataset::subject_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : subjects) ids.push_back(s.id());
  return ids;
}

const SubjectData& PreparedDataset::subject(const std::string& id) const {
  for (const auto& s : subjects) {
    if (s.id() == id) return s;
  }
  throw ContractError("no subject '" + id + "' in the prepared dataset");
}

LabelDistribution PreparedDataset::distribution() const {
  LabelDistribution d;
  for (const auto& s : subjects) {
    const auto sd = label_distribution(s.sequences);
    for (std::size_t i = 0; i < kNumPhases; ++i) d.counts[i] += sd.counts[i];
  }
  return d;
}

std::size_t PreparedDataset::window_total() const { return distribution().total(); }

std::vector<SkeletonSequence> load_pose_directory(const fs::path& dir, const JointSelection& selection) {
  if (!fs::is_directory(dir)) throw IoError("pose directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .jsonl pose files in " + dir.string());
  std::vector<SkeletonSequence> out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    out.push_back(parse_pose_file(f, selection));
    if (!seen.insert(out.back().subject_id).second) {
      throw ParseError(f.string() + ": subject " + out.back().subject_id + " appears in more than one file");
    }
  }
  return out;
}

SubjectData prepare_subject(const SkeletonSequence& raw, std::vector<StrokeAnnotation> strokes,
                            const PrepareOptions& options) {
  options.validate();
  validate_annotations(strokes);
  if (raw.frames.empty()) throw TooShortError("subject " + raw.subject_id + " has no frames");
  const std::size_t first = raw.frames.front().frame_index;
  const std::size_t last = raw.frames.back().frame_index + 1;
  for (const auto& s : strokes) {
    if (s.start_frame < first || s.end_frame > last) {
      throw InvalidAnnotationError("subject " + raw.subject_id + ": stroke [" + std::to_string(s.start_frame) + ", " +
                                   std::to_string(s.end_frame) + ") lies outside frames [" + std::to_string(first) +
                                   ", " + std::to_string(last) + ")");
    }
  }
  SubjectData sd;
  sd.skeleton = options.normalize ? normalize_coords(raw, options.center_joint, options.scale_pair) : raw;
  sd.strokes = std::move(strokes);
  auto windows = slide_windows(sd.skeleton, options.window_len, options.stride);
  label_windows(windows, sd.strokes);
  sd.sequences = group_into_sequences(std::move(windows), raw.subject_id, options.seq_len);
  return sd;
}

PreparedDataset prepare_dataset(const std::vector<SkeletonSequence>& raw, const AnnotationMap& annotations,
                                const PrepareOptions& options, std::string config_hash) {
  PreparedDataset ds;
  ds.options = options;
  ds.config_hash = std::move(config_hash);
  for (const auto& seq : raw) {
    auto it = annotations.find(seq.subject_id);
    ds.subjects.push_back(
        prepare_subject(seq, it == annotations.end() ? std::vector<StrokeAnnotation>{} : it->second, options));
  }
  std::sort(ds.subjects.begin(), ds.subjects.end(),
            [](const SubjectData& a, const SubjectData& b) { return a.id() < b.id(); });
  for (std::size_t i = 1; i < ds.subjects.size(); ++i) {
    if (ds.subjects[i].id() == ds.subjects[i - 1].id()) throw ParseError("duplicate subject " + ds.subjects[i].id());
  }
  return ds;
}

void save_prepared(const fs::path& dir, const PreparedDataset& ds) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["format"] = kFormat;
  manifest["config_hash"] = ds.config_hash;
  manifest["seed"] = ds.seed;
  manifest["windowing"] = ds.options.to_json();
  json subjects = json::array();
  for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
    const SubjectData& s = ds.subjects[i];
    const std::string stem = subject_stem(i);

    std::vector<double> flat;
    flat.reserve(s.skeleton.size() * kNumJoints * 3);
    for (const auto& f : s.skeleton.frames) {
      for (const auto& j : f.joints) {
        flat.push_back(j.x);
        flat.push_back(j.y);
        flat.push_back(j.confidence);
      }
    }
    std::ofstream bin(dir / (stem + ".frames.bin"), std::ios::binary);
    if (!bin) throw IoError("cannot write frames for subject " + s.id());
    bin.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!bin) throw IoError("write failed for subject " + s.id());

    json rec;
    rec["subject_id"] = s.id();
    rec["fps"] = s.skeleton.fps;
    rec["first_frame"] = s.skeleton.frames.front().frame_index;
    rec["frames"] = s.skeleton.size();
    json strokes = json::array();
    for (const auto& st : s.strokes) strokes.push_back({st.start_frame, st.end_frame});
    rec["strokes"] = strokes;
    json seqs = json::array();
    for (const auto& q : s.sequences) {
      seqs.push_back({{"start_frame", q.windows.front().start_frame},
                      {"windows", q.size()},
                      {"labels", labels_string(q.labels)},
                      {"partial", q.partial}});
    }
    rec["sequences"] = seqs;
    write_text(dir / (stem + ".json"), rec.dump(1) + "\n");

    const auto dist = label_distribution(s.sequences);
    subjects.push_back({{"subject_id", s.id()},
                        {"file", stem},
                        {"frames", s.skeleton.size()},
                        {"windows", dist.total()},
                        {"sequences", s.sequences.size()}});
  }
  manifest["subjects"] = subjects;
  const auto dist = ds.distribution();
  json counts;
  for (std::size_t l = 0; l < kNumPhases; ++l) {
    const auto label = static_cast<PhaseLabel>(l);
    counts[std::string(1, phase_char(label))] = {{"count", dist.counts[l]}, {"percent", dist.percent(label)}};
  }
  manifest["label_distribution"] = counts;
  manifest["windows"] = dist.total();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_text(dir / "label_stats.txt", format_label_distribution(dist));
}

PreparedDataset load_prepared(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", "") != kFormat) {
    throw CompatibilityError(dir.string() + " is not a prepared dataset (format " + manifest.value("format", "?") + ")");
  }
  PreparedDataset ds;
  ds.options = PrepareOptions::from_json(manifest.at("windowing"));
  ds.config_hash = manifest.value("config_hash", "");
  ds.seed = manifest.value("seed", std::uint64_t{0});
  for (const auto& entry : manifest.at("subjects")) {
    const std::string stem = entry.at("file").get<std::string>();
    const json rec = read_json(dir / (stem + ".json"));
    SkeletonSequence sk;
    sk.subject_id = rec.at("subject_id").get<std::string>();
    sk.fps = rec.at("fps").get<double>();
    const std::size_t n = rec.at("frames").get<std::size_t>();
    const std::size_t first = rec.at("first_frame").get<std::size_t>();

    std::vector<double> flat(n * kNumJoints * 3);
    std::ifstream bin(dir / (stem + ".frames.bin"), std::ios::binary);
    if (!bin) throw IoError("missing frame file for subject " + sk.subject_id);
    bin.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (bin.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double))) {
      throw ShapeError("frame file for subject " + sk.subject_id + " is truncated");
    }
    sk.frames.resize(n);
    const double* src = flat.data();
    for (std::size_t f = 0; f < n; ++f) {
      sk.frames[f].frame_index = first + f;
      for (auto& j : sk.frames[f].joints) {
        j.x = *src++;
        j.y = *src++;
        j.confidence = *src++;
      }
    }
    std::vector<StrokeAnnotation> strokes;
    for (const auto& st : rec.at("strokes")) strokes.push_back({st.at(0).get<std::size_t>(), st.at(1).get<std::size_t>()});

    // Windows are rebuilt from stored frames; stored labels guard against drift.
    PrepareOptions opts = ds.options;
    opts.normalize = false;
    SubjectData sd = prepare_subject(sk, std::move(strokes), opts);
    const auto& stored = rec.at("sequences");
    bool match = stored.size() == sd.sequences.size();
    for (std::size_t i = 0; match && i < sd.sequences.size(); ++i) {
      match = stored[i].at("labels").get<std::string>() == labels_string(sd.sequences[i].labels) &&
              stored[i].at("partial").get<bool>() == sd.sequences[i].partial;
    }
    if (!match) throw CompatibilityError("stored labels for subject " + sk.subject_id + " do not match its frames");
    ds.subjects.push_back(std::move(sd));
  }
  return ds;
}

}  // namespace gp
