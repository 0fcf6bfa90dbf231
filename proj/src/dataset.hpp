#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pose_io.hpp"
#include "windowing.hpp"

namespace gp {

struct PrepareOptions {
  std::size_t window_len = kDefaultWindowLen;
  std::size_t stride = kDefaultStride;
  std::size_t seq_len = kDefaultSeqLen;
  bool normalize = true;
  std::size_t center_joint = 0;
  std::pair<std::size_t, std::size_t> scale_pair{1, 2};

  void validate() const;
  nlohmann::json to_json() const;
  static PrepareOptions from_json(const nlohmann::json& j);
};

struct SubjectData {
  SkeletonSequence skeleton;  // normalized when requested
  std::vector<StrokeAnnotation> strokes;
  std::vector<WindowSequence> sequences;

  const std::string& id() const { return skeleton.subject_id; }
};

/// Windowed, labeled and grouped data for a set of subjects.
struct PreparedDataset {
  PrepareOptions options;
  std::string config_hash;
  std::uint64_t seed = 0;  // recorded only; preparation draws no randomness
  std::vector<SubjectData> subjects;  // sorted by subject id

  std::vector<std::string> subject_ids() const;
  const SubjectData& subject(const std::string& id) const;
  LabelDistribution distribution() const;
  std::size_t window_total() const;
};

/// Every *.jsonl pose file in `dir`, in file-name order.
std::vector<SkeletonSequence> load_pose_directory(const std::filesystem::path& dir, const JointSelection& selection);

/// Subjects without annotations are labeled all-neutral. Throws
/// InvalidAnnotationError for strokes that run past the subject's frames.
SubjectData prepare_subject(const SkeletonSequence& raw, std::vector<StrokeAnnotation> strokes,
                            const PrepareOptions& options);

PreparedDataset prepare_dataset(const std::vector<SkeletonSequence>& raw, const AnnotationMap& annotations,
                                const PrepareOptions& options, std::string config_hash);

/// Layout: manifest.json, label_stats.txt and per subject a JSON record
/// plus a little-endian float64 frame array.
void save_prepared(const std::filesystem::path& dir, const PreparedDataset& ds);
PreparedDataset load_prepared(const std::filesystem::path& dir);

}  // namespace gp
