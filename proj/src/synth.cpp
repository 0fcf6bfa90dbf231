#include "synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "common.hpp"

namespace gp {

using nlohmann::json;

namespace {

struct Point {
  double x, y;
};

// Upright rest pose in pixels relative to the nose, arms hanging.
std::array<Point, kNumJoints> rest_template() {
  std::array<Point, kNumJoints> p{};
  p[0] = {0, 0};
  p[1] = {60, 60};
  p[2] = {-60, 60};
  p[3] = {75, 150};
  p[4] = {-75, 150};
  p[5] = {80, 235};
  p[6] = {-80, 235};
  // Hand nodes relative to the hand root: thumb tip, then MCP/tip pairs for
  // index, middle, ring and pinky. Mirrored for the right hand.
  const std::array<Point, 10> offs = {
      {{0, 0}, {-14, 24}, {-6, 26}, {-6, 50}, {0, 28}, {0, 55}, {6, 26}, {6, 50}, {11, 22}, {11, 42}}};
  for (std::size_t k = 0; k < 10; ++k) {
    p[7 + k] = {p[5].x + 2 + offs[k].x, p[5].y + 8 + offs[k].y};
    p[17 + k] = {p[6].x - 2 - offs[k].x, p[6].y + 8 + offs[k].y};
  }
  return p;
}

constexpr Point kRaise = {30, -130};
constexpr double kStrokeAmplitude = 40.0;
constexpr double kStrokePeriod = 8.0;  // frames

std::size_t draw_duration(Rng& rng, double mean) {
  const double v = mean * (0.5 + 0.5 * (rng.uniform() + rng.uniform()));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(v)));
}

bool right_arm(std::size_t j) { return j == 6 || j >= 17; }

SubjectTruth plan_subject(const SynthConfig& c, const std::string& id, Rng& rng) {
  SubjectTruth t;
  t.subject_id = id;
  t.frames = c.frames_per_subject;
  const double minutes = static_cast<double>(c.frames_per_subject) / c.fps / 60.0;
  const auto n = static_cast<std::size_t>(std::lround(c.gesture_rate * minutes));
  std::vector<std::array<std::size_t, 3>> durations(n);
  std::size_t busy = 0;
  for (auto& d : durations) {
    d = {draw_duration(rng, c.prep_mean), draw_duration(rng, c.stroke_mean), draw_duration(rng, c.retr_mean)};
    busy += d[0] + d[1] + d[2];
  }
  // One neutral frame at least before, between and after units.
  if (busy + n + 1 > c.frames_per_subject) {
    throw ConfigError("subject " + id + ": " + std::to_string(n) + " gestures need " + std::to_string(busy + n + 1) +
                      " frames but only " + std::to_string(c.frames_per_subject) + " are available");
  }
  const std::size_t spare = c.frames_per_subject - busy - (n + 1);
  std::vector<double> w(n + 1);
  double wsum = 0.0;
  for (auto& v : w) wsum += (v = rng.uniform(0.2, 1.0));
  std::vector<std::size_t> gaps(n + 1);
  std::size_t used = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    gaps[i] = 1 + static_cast<std::size_t>(std::floor(static_cast<double>(spare) * w[i] / wsum));
    used += gaps[i] - 1;
  }
  gaps[n] += spare - used;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cursor += gaps[i];
    GestureTimeline g;
    g.prep = {cursor, cursor + durations[i][0]};
    g.stroke = {g.prep.end, g.prep.end + durations[i][1]};
    g.retr = {g.stroke.end, g.stroke.end + durations[i][2]};
    cursor = g.retr.end;
    t.gestures.push_back(g);
  }
  return t;
}

SkeletonSequence render_subject(const SynthConfig& c, const SubjectTruth& t, Rng& rng) {
  const auto tmpl = rest_template();
  const double scale = rng.uniform(0.85, 1.15);
  const Point origin = {rng.uniform(200, 440), rng.uniform(80, 200)};
  std::vector<Point> raise(t.frames, Point{0, 0});
  for (const auto& g : t.gestures) {
    for (std::size_t f = g.prep.start; f < g.prep.end; ++f) {
      const double s = static_cast<double>(f - g.prep.start + 1) / static_cast<double>(g.prep.length() + 1);
      raise[f] = {s * kRaise.x, s * kRaise.y};
    }
    for (std::size_t f = g.stroke.start; f < g.stroke.end; ++f) {
      const double phase = 6.283185307179586 * static_cast<double>(f - g.stroke.start) / kStrokePeriod;
      raise[f] = {kRaise.x + kStrokeAmplitude * std::sin(phase), kRaise.y};
    }
    for (std::size_t f = g.retr.start; f < g.retr.end; ++f) {
      const double s = 1.0 - static_cast<double>(f - g.retr.start + 1) / static_cast<double>(g.retr.length() + 1);
      raise[f] = {s * kRaise.x, s * kRaise.y};
    }
  }
  SkeletonSequence seq;
  seq.subject_id = t.subject_id;
  seq.fps = c.fps;
  seq.frames.resize(t.frames);
  for (std::size_t f = 0; f < t.frames; ++f) {
    SkeletonFrame& fr = seq.frames[f];
    fr.frame_index = f;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      Point p = tmpl[j];
      const double k = right_arm(j) ? 1.0 : (j == 4 ? 0.5 : 0.0);
      p.x += k * raise[f].x;
      p.y += k * raise[f].y;
      fr.joints[j].x = origin.x + scale * p.x;
      fr.joints[j].y = origin.y + scale * p.y;
      if (c.noise_sigma > 0.0) {
        fr.joints[j].x += c.noise_sigma * rng.normal();
        fr.joints[j].y += c.noise_sigma * rng.normal();
      }
      fr.joints[j].confidence = rng.uniform(0.5, 1.0);
    }
  }
  return seq;
}

json interval_json(FrameInterval i) { return {i.start, i.end}; }

}  // namespace

void SynthConfig::validate() const {
  if (n_subjects == 0) throw ConfigError("synth: n_subjects must be positive");
  if (frames_per_subject == 0) throw ConfigError("synth: frames_per_subject must be positive");
  if (!(gesture_rate >= 0.0)) throw ConfigError("synth: gesture_rate must be non-negative");
  if (!(prep_mean > 0.0 && stroke_mean > 0.0 && retr_mean > 0.0)) throw ConfigError("synth: phase durations must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise sigma must be non-negative");
  if (!(fps > 0.0)) throw ConfigError("synth: fps must be positive");
}

json SynthConfig::to_json() const {
  return {{"n_subjects", n_subjects}, {"frames_per_subject", frames_per_subject},
          {"gesture_rate", gesture_rate}, {"prep_mean", prep_mean},
          {"stroke_mean", stroke_mean},   {"retr_mean", retr_mean},
          {"noise_sigma", noise_sigma},   {"fps", fps},
          {"seed", seed}};
}

std::size_t SynthTruth::gesture_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.gestures.size();
  return n;
}

json SynthTruth::to_json() const {
  json subs = json::array();
  for (const auto& s : subjects) {
    json gs = json::array();
    for (const auto& g : s.gestures) {
      gs.push_back({{"prep", interval_json(g.prep)}, {"stroke", interval_json(g.stroke)}, {"retr", interval_json(g.retr)}});
    }
    subs.push_back({{"subject_id", s.subject_id}, {"frames", s.frames}, {"gestures", gs}});
  }
  return {{"subjects", subs}};
}

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  SynthCorpus corpus;
  corpus.truth.subjects.resize(config.n_subjects);
  corpus.sequences.resize(config.n_subjects);
  for (std::size_t s = 0; s < config.n_subjects; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "synth_%02zu", s + 1);
    Rng rng = Rng::derive(config.seed, 0x5e7d, s);
    corpus.truth.subjects[s] = plan_subject(config, id, rng);
    corpus.sequences[s] = render_subject(config, corpus.truth.subjects[s], rng);
    auto& ann = corpus.annotations[id];
    for (const auto& g : corpus.truth.subjects[s].gestures) ann.push_back({g.stroke.start, g.stroke.end});
  }
  return corpus;
}

std::vector<PhaseLabel> truth_labels(const SubjectTruth& truth, std::size_t n_windows, std::size_t window_len,
                                     std::size_t stride) {
  if (window_len == 0 || stride == 0) throw RangeError("window length and stride must be positive");
  if (n_windows > 0 && (n_windows - 1) * stride + window_len > truth.frames) {
    throw ShapeError("window grid runs past the " + std::to_string(truth.frames) + " frames of subject " +
                     truth.subject_id);
  }
  std::vector<PhaseLabel> frame_phase(truth.frames, PhaseLabel::N);
  for (const auto& g : truth.gestures) {
    for (std::size_t f = g.prep.start; f < g.prep.end; ++f) frame_phase[f] = PhaseLabel::P;
    for (std::size_t f = g.stroke.start; f < g.stroke.end; ++f) frame_phase[f] = PhaseLabel::S;
    for (std::size_t f = g.retr.start; f < g.retr.end; ++f) frame_phase[f] = PhaseLabel::R;
  }
  std::vector<PhaseLabel> out(n_windows);
  for (std::size_t w = 0; w < n_windows; ++w) {
    std::array<std::size_t, kNumPhases> counts{};
    for (std::size_t f = w * stride; f < w * stride + window_len; ++f) ++counts[static_cast<std::size_t>(frame_phase[f])];
    if (2 * counts[1] >= window_len) {
      out[w] = PhaseLabel::S;
      continue;
    }
    PhaseLabel best = PhaseLabel::P;
    for (PhaseLabel l : {PhaseLabel::R, PhaseLabel::N}) {
      if (counts[static_cast<std::size_t>(l)] > counts[static_cast<std::size_t>(best)]) best = l;
    }
    out[w] = best;
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus, const JointSelection& selection) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "poses", ec);
  if (ec) throw IoError("cannot create " + (dir / "poses").string() + ": " + ec.message());
  for (const auto& seq : corpus.sequences) write_pose_file(dir / "poses" / (seq.subject_id + ".jsonl"), seq, selection);
  write_annotation_file(dir / "annotations.csv", corpus.annotations);
  std::ofstream truth(dir / "truth.json");
  if (!truth) throw IoError("cannot write truth.json");
  truth << corpus.truth.to_json().dump(1) << "\n";
  selection.save(dir / "joint_selection.json");
}

}  // namespace gp
