#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pose_io.hpp"

namespace gp {

inline constexpr std::size_t kDefaultWindowLen = 18;
inline constexpr std::size_t kDefaultStride = 2;
inline constexpr std::size_t kDefaultSeqLen = 40;
inline constexpr std::size_t kFeatureChannels = 3;

enum class PhaseLabel : std::uint8_t { P = 0, S = 1, R = 2, N = 3 };
enum class BinaryLabel : std::uint8_t { O = 0, S = 1 };

inline constexpr std::size_t kNumPhases = 4;

char phase_char(PhaseLabel l);
PhaseLabel phase_from_char(char c);

/// Half-open frame interval [start, end).
struct FrameInterval {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - start; }
};

/// An 18 x 27 x 3 slice of the keypoint stream, stored frame-major then
/// joint then channel (x, y, confidence).
struct TimeWindow {
  std::size_t start_frame = 0;
  std::size_t length = kDefaultWindowLen;
  std::vector<float> features;
  std::optional<PhaseLabel> label;

  FrameInterval interval() const { return {start_frame, start_frame + length}; }
};

/// Up to `seq_len` consecutive windows of one subject with aligned labels.
struct WindowSequence {
  std::string subject_id;
  std::vector<TimeWindow> windows;
  std::vector<PhaseLabel> labels;
  bool partial = false;

  std::size_t size() const { return windows.size(); }
};

/// Window i spans [i * stride, i * stride + window_len).
std::vector<TimeWindow> slide_windows(const SkeletonSequence& seq, std::size_t window_len = kDefaultWindowLen,
                                      std::size_t stride = kDefaultStride);

std::size_t window_count(std::size_t n_frames, std::size_t window_len, std::size_t stride);

/// |window ∩ stroke| / |window| in frames.
double overlap_fraction(FrameInterval window, const StrokeAnnotation& stroke);

/// Throws InvalidAnnotationError for unsorted, empty, or overlapping strokes.
void validate_annotations(std::span<const StrokeAnnotation> annotations);

/// Multi-phase labeling from stroke annotations.
///
/// S when some stroke covers at least half of the window. Otherwise the
/// stroke with the largest overlap decides: P when the window reaches the
/// stroke's start, R when it reaches the stroke's end. A stroke lying
/// strictly inside the window picks the boundary nearer the window center.
/// Equal overlaps with P and R candidates resolve to P. No overlap gives N.
PhaseLabel label_window(FrameInterval window, std::span<const StrokeAnnotation> annotations);

BinaryLabel label_window_binary(FrameInterval window, std::span<const StrokeAnnotation> annotations);

inline BinaryLabel to_binary(PhaseLabel l) { return l == PhaseLabel::S ? BinaryLabel::S : BinaryLabel::O; }

/// Assigns labels in place to every window.
void label_windows(std::vector<TimeWindow>& windows, std::span<const StrokeAnnotation> annotations);

/// Consecutive non-overlapping groups of `seq_len` windows; a trailing
/// shorter group is kept with `partial` set.
std::vector<WindowSequence> group_into_sequences(std::vector<TimeWindow> windows, const std::string& subject_id,
                                                 std::size_t seq_len = kDefaultSeqLen);

struct LabelDistribution {
  std::array<std::size_t, kNumPhases> counts{};

  std::size_t total() const;
  double percent(PhaseLabel l) const;
  bool operator==(const LabelDistribution&) const = default;
};

LabelDistribution label_distribution(std::span<const WindowSequence> sequences);

/// Counts as rows of "label & count & percent" for display.
std::string format_label_distribution(const LabelDistribution& dist);

}  // namespace gp
