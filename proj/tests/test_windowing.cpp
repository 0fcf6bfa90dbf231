#include <doctest.h>

#include <string>

#include "helpers.hpp"
#include "label_fixtures.hpp"
#include "windowing.hpp"

using namespace gp;

namespace {

std::size_t expected_windows(std::size_t n, std::size_t len, std::size_t stride) {
  return n < len ? 0 : (n - len) / stride + 1;
}

std::vector<TimeWindow> labeled_windows(const std::string& labels) {
  std::vector<TimeWindow> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i].start_frame = 2 * i;
    out[i].label = phase_from_char(labels[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("slide_windows: counts and spans") {
  const auto seq = testing::ramp_sequence("s", 96, 100);
  const auto w = slide_windows(seq);
  REQUIRE(w.size() == 40);
  CHECK(w.front().interval().start == 100);
  CHECK(w.front().interval().end == 118);
  CHECK(w.back().interval().start == 178);
  CHECK(w.back().interval().end == 196);
  CHECK(slide_windows(testing::ramp_sequence("s", 18)).size() == 1);
  CHECK_THROWS_AS(slide_windows(testing::ramp_sequence("s", 17)), TooShortError);
  CHECK_THROWS_AS(slide_windows(seq, 18, 0), RangeError);
}

TEST_CASE("slide_windows: features are frame-major, joint, then x/y/confidence") {
  const auto seq = testing::ramp_sequence("s", 30);
  const auto w = slide_windows(seq, 18, 2);
  const auto& win = w[3];
  for (std::size_t f : {std::size_t{0}, std::size_t{17}}) {
    for (std::size_t j : {std::size_t{0}, std::size_t{26}}) {
      const Joint& src = seq.frames[6 + f].joints[j];
      const float* dst = win.features.data() + (f * kNumJoints + j) * kFeatureChannels;
      CHECK(dst[0] == static_cast<float>(src.x));
      CHECK(dst[1] == static_cast<float>(src.y));
      CHECK(dst[2] == static_cast<float>(src.confidence));
    }
  }
}

TEST_CASE("window_count matches the closed form over many lengths") {
  for (std::size_t n = 0; n < 400; ++n) {
    for (std::size_t stride : {1, 2, 3, 5}) {
      CHECK(window_count(n, 18, stride) == expected_windows(n, 18, stride));
    }
  }
  CHECK(window_count(96, 18, 2) == 40);
}

TEST_CASE("overlap_fraction") {
  CHECK(overlap_fraction({0, 18}, {6, 30}) == doctest::Approx(12.0 / 18.0));
  CHECK(overlap_fraction({12, 30}, {6, 30}) == 1.0);
  CHECK(overlap_fraction({0, 18}, {20, 40}) == 0.0);
  CHECK(overlap_fraction({0, 18}, {18, 40}) == 0.0);
}

TEST_CASE("label_window: fixture table") {
  const auto fixtures = testing::label_fixtures();
  CHECK(fixtures.size() >= 25);
  for (const auto& fx : fixtures) {
    INFO(fx.name);
    CHECK(label_window(fx.window, fx.strokes) == fx.expected);
    CHECK(label_window_binary(fx.window, fx.strokes) == to_binary(fx.expected));
  }
}

TEST_CASE("label_window: binary examples") {
  const std::vector<StrokeAnnotation> s{{6, 30}};
  CHECK(label_window_binary({0, 18}, s) == BinaryLabel::S);
  CHECK(label_window_binary({0, 18}, std::vector<StrokeAnnotation>{{12, 40}}) == BinaryLabel::O);
  CHECK(label_window_binary({60, 78}, s) == BinaryLabel::O);
}

TEST_CASE("label_window: every window fully inside a stroke is S and far windows are N") {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t start = rng.below(200);
    const std::size_t len = 1 + rng.below(80);
    const std::vector<StrokeAnnotation> s{{start, start + len}};
    const std::size_t w0 = rng.below(300);
    const FrameInterval w{w0, w0 + 18};
    const PhaseLabel l = label_window(w, s);
    const double ov = overlap_fraction(w, s[0]);
    if (ov >= 0.5) {
      CHECK(l == PhaseLabel::S);
    } else if (ov == 0.0) {
      CHECK(l == PhaseLabel::N);
    } else {
      CHECK((l == PhaseLabel::P || l == PhaseLabel::R));
    }
  }
}

TEST_CASE("validate_annotations rejects empty, unsorted and overlapping strokes") {
  CHECK_THROWS_AS(validate_annotations(std::vector<StrokeAnnotation>{{5, 5}}), InvalidAnnotationError);
  CHECK_THROWS_AS(validate_annotations(std::vector<StrokeAnnotation>{{20, 30}, {0, 10}}), InvalidAnnotationError);
  CHECK_THROWS_AS(validate_annotations(std::vector<StrokeAnnotation>{{0, 10}, {9, 12}}), InvalidAnnotationError);
  CHECK_NOTHROW(validate_annotations(std::vector<StrokeAnnotation>{{0, 10}, {10, 12}}));
}

TEST_CASE("group_into_sequences") {
  auto make = [](std::size_t n) { return std::vector<TimeWindow>(n); };
  const auto g85 = group_into_sequences(make(85), "s");
  REQUIRE(g85.size() == 3);
  CHECK(g85[0].size() == 40);
  CHECK_FALSE(g85[0].partial);
  CHECK(g85[1].size() == 40);
  CHECK(g85[2].size() == 5);
  CHECK(g85[2].partial);
  CHECK(g85[2].subject_id == "s");

  const auto g40 = group_into_sequences(make(40), "s");
  REQUIRE(g40.size() == 1);
  CHECK_FALSE(g40[0].partial);
  CHECK(group_into_sequences(make(0), "s").empty());

  const auto labeled = group_into_sequences(labeled_windows("NPSRN"), "s", 3);
  REQUIRE(labeled.size() == 2);
  CHECK(labeled[0].labels == std::vector<PhaseLabel>{PhaseLabel::N, PhaseLabel::P, PhaseLabel::S});
  CHECK(labeled[1].labels == std::vector<PhaseLabel>{PhaseLabel::R, PhaseLabel::N});
}

TEST_CASE("label_distribution") {
  const auto seqs = group_into_sequences(labeled_windows("NNPS"), "s");
  const auto d = label_distribution(seqs);
  CHECK(d.counts[0] == 1);
  CHECK(d.counts[1] == 1);
  CHECK(d.counts[2] == 0);
  CHECK(d.counts[3] == 2);
  CHECK(d.total() == 4);
  CHECK(d.percent(PhaseLabel::N) == doctest::Approx(50.0));
  CHECK(label_distribution(std::vector<WindowSequence>{}).total() == 0);
  const std::string table = format_label_distribution(d);
  CHECK(table.find('P') != std::string::npos);
}

TEST_CASE("phase characters round-trip") {
  for (char c : std::string("PSRN")) CHECK(phase_char(phase_from_char(c)) == c);
  CHECK(static_cast<int>(phase_from_char('P')) == 0);
  CHECK(static_cast<int>(phase_from_char('N')) == 3);
}
