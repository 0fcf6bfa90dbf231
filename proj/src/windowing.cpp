#include "windowing.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>

#include "common.hpp"

namespace gp {

char phase_char(PhaseLabel l) {
  switch (l) {
    case PhaseLabel::P: return 'P';
    case PhaseLabel::S: return 'S';
    case PhaseLabel::R: return 'R';
    case PhaseLabel::N: return 'N';
  }
  return '?';
}

PhaseLabel phase_from_char(char c) {
  switch (c) {
    case 'P': return PhaseLabel::P;
    case 'S': return PhaseLabel::S;
    case 'R': return PhaseLabel::R;
    case 'N': return PhaseLabel::N;
    default: throw ParseError(std::string("unknown phase label '") + c + "'");
  }
}

std::size_t window_count(std::size_t n_frames, std::size_t window_len, std::size_t stride) {
  if (window_len == 0 || stride == 0) throw RangeError("window length and stride must be positive");
  if (n_frames < window_len) return 0;
  return (n_frames - window_len) / stride + 1;
}

std::vector<TimeWindow> slide_windows(const SkeletonSequence& seq, std::size_t window_len, std::size_t stride) {
  if (window_len == 0 || stride == 0) throw RangeError("window length and stride must be positive");
  if (seq.size() < window_len) {
    throw TooShortError("subject " + seq.subject_id + ": " + std::to_string(seq.size()) +
                        " frames is shorter than the window length " + std::to_string(window_len));
  }
  const std::size_t n = window_count(seq.size(), window_len, stride);
  const std::size_t origin = seq.frames.front().frame_index;
  std::vector<TimeWindow> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    TimeWindow& w = out[i];
    w.start_frame = origin + i * stride;
    w.length = window_len;
    w.features.resize(window_len * kNumJoints * kFeatureChannels);
    float* dst = w.features.data();
    for (std::size_t f = 0; f < window_len; ++f) {
      for (const Joint& j : seq.frames[i * stride + f].joints) {
        *dst++ = static_cast<float>(j.x);
        *dst++ = static_cast<float>(j.y);
        *dst++ = static_cast<float>(j.confidence);
      }
    }
  }
  return out;
}

namespace {

std::size_t overlap_frames(FrameInterval w, const StrokeAnnotation& s) {
  const std::size_t lo = std::max(w.start, s.start_frame);
  const std::size_t hi = std::min(w.end, s.end_frame);
  return hi > lo ? hi - lo : 0;
}

// P or R for a stroke overlapping the window by less than half.
PhaseLabel boundary_label(FrameInterval w, const StrokeAnnotation& s) {
  const bool reaches_start = w.start < s.start_frame;
  const bool reaches_end = w.end > s.end_frame;
  if (reaches_start && reaches_end) {
    // Stroke strictly inside the window; compare in doubled units to stay integral.
    const long long center2 = static_cast<long long>(w.start + w.end);
    const long long to_start = std::llabs(center2 - 2 * static_cast<long long>(s.start_frame));
    const long long to_end = std::llabs(center2 - 2 * static_cast<long long>(s.end_frame));
    return to_end < to_start ? PhaseLabel::R : PhaseLabel::P;
  }
  return reaches_start ? PhaseLabel::P : PhaseLabel::R;
}

}  // namespace

double overlap_fraction(FrameInterval window, const StrokeAnnotation& stroke) {
  if (window.length() == 0) return 0.0;
  return static_cast<double>(overlap_frames(window, stroke)) / static_cast<double>(window.length());
}

void validate_annotations(std::span<const StrokeAnnotation> annotations) {
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (annotations[i].start_frame >= annotations[i].end_frame) {
      throw InvalidAnnotationError("stroke " + std::to_string(i) + " is empty or reversed");
    }
    if (i > 0 && annotations[i].start_frame < annotations[i - 1].end_frame) {
      throw InvalidAnnotationError("strokes " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                   " overlap or are unsorted");
    }
  }
}

PhaseLabel label_window(FrameInterval window, std::span<const StrokeAnnotation> annotations) {
  validate_annotations(annotations);
  std::size_t best = 0;
  std::optional<PhaseLabel> best_label;
  for (const auto& s : annotations) {
    const std::size_t ov = overlap_frames(window, s);
    if (ov == 0) continue;
    if (2 * ov >= window.length()) return PhaseLabel::S;
    const PhaseLabel l = boundary_label(window, s);
    if (ov > best || (ov == best && l == PhaseLabel::P)) {
      best = ov;
      best_label = l;
    }
  }
  return best_label.value_or(PhaseLabel::N);
}

BinaryLabel label_window_binary(FrameInterval window, std::span<const StrokeAnnotation> annotations) {
  return to_binary(label_window(window, annotations));
}

void label_windows(std::vector<TimeWindow>& windows, std::span<const StrokeAnnotation> annotations) {
  validate_annotations(annotations);
  for (auto& w : windows) w.label = label_window(w.interval(), annotations);
}

std::vector<WindowSequence> group_into_sequences(std::vector<TimeWindow> windows, const std::string& subject_id,
                                                 std::size_t seq_len) {
  if (seq_len == 0) throw RangeError("sequence length must be positive");
  std::vector<WindowSequence> out;
  for (std::size_t begin = 0; begin < windows.size(); begin += seq_len) {
    const std::size_t end = std::min(windows.size(), begin + seq_len);
    WindowSequence seq;
    seq.subject_id = subject_id;
    seq.partial = end - begin < seq_len;
    seq.windows.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      seq.labels.push_back(windows[i].label.value_or(PhaseLabel::N));
      seq.windows.push_back(std::move(windows[i]));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::size_t LabelDistribution::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

double LabelDistribution::percent(PhaseLabel l) const {
  const std::size_t t = total();
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(counts[static_cast<std::size_t>(l)]) / static_cast<double>(t);
}

LabelDistribution label_distribution(std::span<const WindowSequence> sequences) {
  LabelDistribution d;
  for (const auto& s : sequences) {
    for (PhaseLabel l : s.labels) ++d.counts[static_cast<std::size_t>(l)];
  }
  return d;
}

std::string format_label_distribution(const LabelDistribution& dist) {
  static constexpr std::array<const char*, kNumPhases> names = {"Preparation", "Stroke", "Retraction", "Neutral"};
  std::string out = "label\tcount\tpercent\n";
  char buf[128];
  for (std::size_t i = 0; i < kNumPhases; ++i) {
    const auto l = static_cast<PhaseLabel>(i);
    std::snprintf(buf, sizeof(buf), "%c: %s\t%zu\t%.1f %%\n", phase_char(l), names[i], dist.counts[i], dist.percent(l));
    out += buf;
  }
  return out;
}

}  // namespace gp
