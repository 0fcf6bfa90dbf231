#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pose_io.hpp"
#include "windowing.hpp"

namespace gp {

struct SynthConfig {
  std::size_t n_subjects = 8;
  std::size_t frames_per_subject = 2900;
  double gesture_rate = 25.0;  // gestures per minute
  double prep_mean = 8.0;      // frames
  double stroke_mean = 17.0;
  double retr_mean = 8.0;
  double noise_sigma = 2.0;  // pixels
  double fps = kDefaultFps;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct GestureTimeline {
  FrameInterval prep;
  FrameInterval stroke;
  FrameInterval retr;
};

struct SubjectTruth {
  std::string subject_id;
  std::size_t frames = 0;
  std::vector<GestureTimeline> gestures;
};

struct SynthTruth {
  std::vector<SubjectTruth> subjects;

  std::size_t gesture_count() const;
  nlohmann::json to_json() const;
};

struct SynthCorpus {
  std::vector<SkeletonSequence> sequences;
  AnnotationMap annotations;  // stroke intervals only
  SynthTruth truth;
};

/// Rest pose with the right arm raised along a ramp (preparation),
/// oscillating sideways (stroke) and lowered again (retraction). Throws
/// ConfigError when the requested gestures do not fit the frame budget.
SynthCorpus generate(const SynthConfig& config);

/// Labels from the full phase timeline: S when at least half the window is
/// stroke, otherwise the phase covering most frames (ties P, R, N in that
/// order). Throws ShapeError when the grid runs past the subject's frames.
std::vector<PhaseLabel> truth_labels(const SubjectTruth& truth, std::size_t n_windows,
                                     std::size_t window_len = kDefaultWindowLen, std::size_t stride = kDefaultStride);

/// poses/<subject>.jsonl, annotations.csv, truth.json and the joint
/// selection used for the pose files.
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus, const JointSelection& selection);

}  // namespace gp
