#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace gp {

inline constexpr std::size_t kNumJoints = 27;
inline constexpr double kDefaultFps = 29.97;

struct Joint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  bool operator==(const Joint&) const = default;
};

struct SkeletonFrame {
  std::size_t frame_index = 0;
  std::array<Joint, kNumJoints> joints{};

  bool operator==(const SkeletonFrame&) const = default;
};

/// One subject's keypoint stream. Frame indices are contiguous.
struct SkeletonSequence {
  std::string subject_id;
  double fps = kDefaultFps;
  std::vector<SkeletonFrame> frames;

  std::size_t size() const { return frames.size(); }
};

/// Maps the source keypoint layout (133 whole-body keypoints by default)
/// onto the 27 upper-body graph nodes.
struct JointSelection {
  std::size_t source_count = 133;
  std::array<std::size_t, kNumJoints> indices{};
  std::array<std::string, kNumJoints> names{};

  /// Nose, shoulders, elbows, wrists and ten keypoints per hand of the
  /// COCO-WholeBody layout.
  static JointSelection whole_body_default();
  static JointSelection load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Throws ShapeError unless the indices are 27 distinct values in range.
  void validate() const;
};

struct StrokeAnnotation {
  std::size_t start_frame = 0;  // inclusive
  std::size_t end_frame = 0;    // exclusive

  std::size_t length() const { return end_frame - start_frame; }
  bool operator==(const StrokeAnnotation&) const = default;
};

using AnnotationMap = std::map<std::string, std::vector<StrokeAnnotation>>;

/// Reads newline-delimited JSON records of the form
/// {"subject_id": ..., "frame_index": ..., "keypoints": [[x, y, c], ...]}.
SkeletonSequence parse_pose_file(const std::filesystem::path& path, const JointSelection& selection);
SkeletonSequence parse_pose_text(const std::string& text, const JointSelection& selection,
                                 const std::string& origin = "<memory>");

/// Writes `seq` in the pose file format, scattering the selected joints into
/// `selection.source_count` keypoints; unselected keypoints are (0, 0, 0).
void write_pose_file(const std::filesystem::path& path, const SkeletonSequence& seq,
                     const JointSelection& selection);
std::string serialize_pose_text(const SkeletonSequence& seq, const JointSelection& selection);

/// CSV with header `subject_id,stroke_start_frame,stroke_end_frame`.
AnnotationMap parse_annotation_file(const std::filesystem::path& path);
void write_annotation_file(const std::filesystem::path& path, const AnnotationMap& annotations);

/// Translates every frame so `center_joint` sits at the origin and divides
/// all coordinates by the mean distance between the two `scale_pair` joints.
SkeletonSequence normalize_coords(const SkeletonSequence& seq, std::size_t center_joint,
                                  std::pair<std::size_t, std::size_t> scale_pair);

}  // namespace gp
