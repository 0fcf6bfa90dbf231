#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "helpers.hpp"
#include "pose_io.hpp"

using namespace gp;
using nlohmann::json;

namespace {

// One pose record with keypoint k at (k, 2k, 0.9) unless overridden.
std::string record(const std::string& subject, std::size_t frame, std::size_t keypoints = 133, double shift = 0.0) {
  json kps = json::array();
  for (std::size_t k = 0; k < keypoints; ++k) {
    kps.push_back({static_cast<double>(k) + shift, 2.0 * static_cast<double>(k), 0.9});
  }
  return json{{"subject_id", subject}, {"frame_index", frame}, {"keypoints", kps}}.dump() + "\n";
}

SkeletonSequence two_joint_sequence(const std::vector<double>& scale_distances) {
  SkeletonSequence s;
  s.subject_id = "x";
  for (std::size_t f = 0; f < scale_distances.size(); ++f) {
    SkeletonFrame fr;
    fr.frame_index = f;
    for (auto& j : fr.joints) j = {10.0, 20.0, 1.0};
    fr.joints[2] = {10.0 + scale_distances[f], 20.0, 1.0};
    fr.joints[5] = {13.0, 24.0, 0.5};
    s.frames.push_back(fr);
  }
  return s;
}

}  // namespace

TEST_CASE("default joint selection picks 27 distinct whole-body keypoints") {
  const auto sel = JointSelection::whole_body_default();
  CHECK(sel.source_count == 133);
  std::set<std::size_t> distinct(sel.indices.begin(), sel.indices.end());
  CHECK(distinct.size() == kNumJoints);
  CHECK(*distinct.rbegin() < 133);
  CHECK_NOTHROW(sel.validate());

  auto bad = sel;
  bad.indices[3] = bad.indices[4];
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = sel;
  bad.indices[0] = 133;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("parse: three frames of 133 keypoints select 27 joints") {
  const auto sel = JointSelection::whole_body_default();
  const std::string text = record("s1", 0) + record("s1", 1) + "\n" + record("s1", 2);
  const auto seq = parse_pose_text(text, sel);
  CHECK(seq.subject_id == "s1");
  REQUIRE(seq.size() == 3);
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    CHECK(seq.frames[2].joints[j].x == static_cast<double>(sel.indices[j]));
    CHECK(seq.frames[2].joints[j].y == 2.0 * static_cast<double>(sel.indices[j]));
    CHECK(seq.frames[2].joints[j].confidence == 0.9);
  }
}

TEST_CASE("parse: shape, gap and content errors") {
  const auto sel = JointSelection::whole_body_default();
  SUBCASE("130 keypoints names the frame") {
    try {
      parse_pose_text(record("s", 0) + record("s", 1, 130), sel);
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
    }
  }
  SUBCASE("frames 0, 1, 3 report missing index 2") {
    try {
      parse_pose_text(record("s", 0) + record("s", 1) + record("s", 3), sel);
      FAIL("expected a gap error");
    } catch (const GapError& e) {
      CHECK(std::string(e.what()).find("missing index 2") != std::string::npos);
    }
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(parse_pose_text("{not json}\n", sel), ParseError); }
  SUBCASE("mixed subjects") { CHECK_THROWS_AS(parse_pose_text(record("a", 0) + record("b", 1), sel), ParseError); }
  SUBCASE("confidence out of range") {
    json r = json::parse(record("s", 0));
    r["keypoints"][sel.indices[0]][2] = 1.5;
    CHECK_THROWS_AS(parse_pose_text(r.dump() + "\n", sel), ParseError);
  }
  SUBCASE("negative frame index") {
    json r = json::parse(record("s", 0));
    r["frame_index"] = -1;
    CHECK_THROWS_AS(parse_pose_text(r.dump() + "\n", sel), ParseError);
  }
}

TEST_CASE("pose files round-trip through serialization") {
  const auto sel = JointSelection::whole_body_default();
  auto seq = testing::ramp_sequence("rt", 5, 10);
  seq.fps = 25.0;
  testing::TempDir dir("pose");
  write_pose_file(dir / "rt.jsonl", seq, sel);
  const auto back = parse_pose_file(dir / "rt.jsonl", sel);
  CHECK(back.subject_id == "rt");
  CHECK(back.fps == 25.0);
  REQUIRE(back.size() == 5);
  for (std::size_t f = 0; f < 5; ++f) CHECK(back.frames[f] == seq.frames[f]);
}

TEST_CASE("joint selections round-trip through files") {
  testing::TempDir dir("sel");
  auto sel = JointSelection::whole_body_default();
  sel.save(dir / "sel.json");
  const auto back = JointSelection::load(dir / "sel.json");
  CHECK(back.indices == sel.indices);
  CHECK(back.names == sel.names);
  CHECK(back.source_count == sel.source_count);
}

TEST_CASE("annotation CSV parsing") {
  testing::TempDir dir("ann");
  {
    std::ofstream out(dir / "a.csv");
    out << "subject_id,stroke_start_frame,stroke_end_frame\r\n"
        << "s1,40,60\r\n"
        << "s1,10,20\n"
        << "s2,0,5\n";
  }
  const auto ann = parse_annotation_file(dir / "a.csv");
  REQUIRE(ann.size() == 2);
  REQUIRE(ann.at("s1").size() == 2);
  CHECK(ann.at("s1")[0] == StrokeAnnotation{10, 20});
  CHECK(ann.at("s1")[1] == StrokeAnnotation{40, 60});

  write_annotation_file(dir / "b.csv", ann);
  CHECK(parse_annotation_file(dir / "b.csv") == ann);

  {
    std::ofstream out(dir / "overlap.csv");
    out << "s1,10,20\ns1,15,30\n";
  }
  CHECK_THROWS_AS(parse_annotation_file(dir / "overlap.csv"), InvalidAnnotationError);
  {
    std::ofstream out(dir / "reversed.csv");
    out << "s1,20,10\n";
  }
  CHECK_THROWS_AS(parse_annotation_file(dir / "reversed.csv"), InvalidAnnotationError);
  {
    std::ofstream out(dir / "garbage.csv");
    out << "s1,abc,10\n";
  }
  CHECK_THROWS_AS(parse_annotation_file(dir / "garbage.csv"), ParseError);
  CHECK_THROWS_AS(parse_annotation_file(dir / "missing.csv"), IoError);
}

TEST_CASE("normalize: identity scale, hand-computed divisor, degenerate input") {
  SUBCASE("scale pair at distance 1 leaves translated coordinates unchanged") {
    const auto seq = two_joint_sequence({1.0, 1.0});
    const auto n = normalize_coords(seq, 0, {0, 2});
    CHECK(n.frames[0].joints[0].x == 0.0);
    CHECK(n.frames[0].joints[2].x == doctest::Approx(1.0));
    CHECK(n.frames[1].joints[5].x == doctest::Approx(3.0));
    CHECK(n.frames[1].joints[5].y == doctest::Approx(4.0));
    CHECK(n.frames[1].joints[5].confidence == 0.5);
  }
  SUBCASE("distances 2 and 4 give divisor 3 in every frame") {
    const auto n = normalize_coords(two_joint_sequence({2.0, 4.0}), 0, {0, 2});
    CHECK(n.frames[0].joints[2].x == doctest::Approx(2.0 / 3.0));
    CHECK(n.frames[1].joints[2].x == doctest::Approx(4.0 / 3.0));
    CHECK(n.frames[0].joints[5].y == doctest::Approx(4.0 / 3.0));
  }
  SUBCASE("coincident scale joints") {
    CHECK_THROWS_AS(normalize_coords(two_joint_sequence({0.0, 0.0}), 0, {0, 2}), DegeneratePoseError);
  }
}

TEST_CASE("normalize: translation invariance and idempotence") {
  Rng rng(4);
  SkeletonSequence s = testing::ramp_sequence("p", 6);
  for (auto& f : s.frames) {
    for (auto& j : f.joints) {
      j.x += 20 * rng.normal();
      j.y += 20 * rng.normal();
    }
  }
  SkeletonSequence moved = s;
  for (auto& f : moved.frames) {
    for (auto& j : f.joints) {
      j.x += 5.0;
      j.y += 7.0;
    }
  }
  const auto a = normalize_coords(s, 0, {1, 2});
  const auto b = normalize_coords(moved, 0, {1, 2});
  const auto twice = normalize_coords(a, 0, {1, 2});
  for (std::size_t f = 0; f < s.size(); ++f) {
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      CHECK(a.frames[f].joints[j].x == doctest::Approx(b.frames[f].joints[j].x).epsilon(1e-12));
      CHECK(a.frames[f].joints[j].y == doctest::Approx(b.frames[f].joints[j].y).epsilon(1e-12));
      CHECK(twice.frames[f].joints[j].x == doctest::Approx(a.frames[f].joints[j].x).epsilon(1e-12));
    }
  }
  double mean = 0;
  for (const auto& f : a.frames) mean += std::hypot(f.joints[1].x - f.joints[2].x, f.joints[1].y - f.joints[2].y);
  CHECK(mean / static_cast<double>(a.size()) == doctest::Approx(1.0));
}
