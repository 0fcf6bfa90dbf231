#include "pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "common.hpp"

namespace gp {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

constexpr std::array<std::size_t, kNumJoints> kWholeBodyIndices = {
    0,   5,   6,   7,   8,   9,   10,                                // nose, shoulders, elbows, wrists
    91,  95,  96,  99,  100, 103, 104, 107, 108, 111,              // left hand
    112, 116, 117, 120, 121, 124, 125, 128, 129, 132,              // right hand
};

constexpr std::array<const char*, kNumJoints> kWholeBodyNames = {
    "nose",          "left_shoulder",   "right_shoulder",  "left_elbow",      "right_elbow",
    "left_wrist",    "right_wrist",     "left_hand_root",  "left_thumb_tip",  "left_index_mcp",
    "left_index_tip", "left_middle_mcp", "left_middle_tip", "left_ring_mcp",  "left_ring_tip",
    "left_pinky_mcp", "left_pinky_tip", "right_hand_root", "right_thumb_tip", "right_index_mcp",
    "right_index_tip", "right_middle_mcp", "right_middle_tip", "right_ring_mcp", "right_ring_tip",
    "right_pinky_mcp", "right_pinky_tip",
};

}  // namespace

JointSelection JointSelection::whole_body_default() {
  JointSelection sel;
  sel.source_count = 133;
  sel.indices = kWholeBodyIndices;
  for (std::size_t i = 0; i < kNumJoints; ++i) sel.names[i] = kWholeBodyNames[i];
  return sel;
}

void JointSelection::validate() const {
  std::set<std::size_t> seen;
  for (std::size_t idx : indices) {
    if (idx >= source_count) {
      throw ShapeError("joint selection index " + std::to_string(idx) + " out of range for " +
                       std::to_string(source_count) + " source keypoints");
    }
    if (!seen.insert(idx).second) throw ShapeError("joint selection index " + std::to_string(idx) + " repeated");
  }
}

JointSelection JointSelection::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  JointSelection sel;
  try {
    sel.source_count = j.at("source_count").get<std::size_t>();
    const auto idx = j.at("indices").get<std::vector<std::size_t>>();
    if (idx.size() != kNumJoints) {
      throw ShapeError(path.string() + ": expected " + std::to_string(kNumJoints) + " indices, got " +
                       std::to_string(idx.size()));
    }
    std::copy(idx.begin(), idx.end(), sel.indices.begin());
    if (j.contains("names")) {
      const auto names = j.at("names").get<std::vector<std::string>>();
      if (names.size() != kNumJoints) throw ShapeError(path.string() + ": names must list 27 joints");
      std::copy(names.begin(), names.end(), sel.names.begin());
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  sel.validate();
  return sel;
}

void JointSelection::save(const std::filesystem::path& path) const {
  json j;
  j["source_count"] = source_count;
  j["indices"] = std::vector<std::size_t>(indices.begin(), indices.end());
  j["names"] = std::vector<std::string>(names.begin(), names.end());
  write_file(path, j.dump(2) + "\n");
}

SkeletonSequence parse_pose_text(const std::string& text, const JointSelection& selection, const std::string& origin) {
  selection.validate();
  SkeletonSequence seq;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_subject = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where + ": malformed record: " + e.what());
    }
    std::string subject;
    std::size_t frame_index = 0;
    const json* keypoints = nullptr;
    try {
      subject = rec.at("subject_id").get<std::string>();
      const auto& fi = rec.at("frame_index");
      if (!fi.is_number_integer() || fi.get<long long>() < 0) throw ParseError(where + ": frame_index must be an integer >= 0");
      frame_index = fi.get<std::size_t>();
      keypoints = &rec.at("keypoints");
      if (rec.contains("fps")) seq.fps = rec.at("fps").get<double>();
    } catch (const json::exception& e) {
      throw ParseError(where + ": malformed record: " + e.what());
    }
    if (!keypoints->is_array()) throw ParseError(where + ": keypoints must be an array");
    if (keypoints->size() != selection.source_count) {
      throw ShapeError(where + ": frame " + std::to_string(frame_index) + " has " + std::to_string(keypoints->size()) +
                       " keypoints, expected " + std::to_string(selection.source_count));
    }
    if (!have_subject) {
      seq.subject_id = subject;
      have_subject = true;
    } else if (subject != seq.subject_id) {
      throw ParseError(where + ": subject_id '" + subject + "' differs from '" + seq.subject_id + "'");
    }
    if (!seq.frames.empty()) {
      const std::size_t expected = seq.frames.back().frame_index + 1;
      if (frame_index != expected) {
        throw GapError(where + ": frame index " + std::to_string(frame_index) + " follows " +
                       std::to_string(expected - 1) + "; missing index " + std::to_string(expected));
      }
    }
    SkeletonFrame frame;
    frame.frame_index = frame_index;
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const json& kp = (*keypoints)[selection.indices[j]];
      if (!kp.is_array() || kp.size() != 3 || !kp[0].is_number() || !kp[1].is_number() || !kp[2].is_number()) {
        throw ParseError(where + ": keypoint " + std::to_string(selection.indices[j]) + " is not an [x, y, confidence] triple");
      }
      Joint joint{kp[0].get<double>(), kp[1].get<double>(), kp[2].get<double>()};
      if (!std::isfinite(joint.x) || !std::isfinite(joint.y)) throw ParseError(where + ": non-finite coordinate");
      if (!(joint.confidence >= 0.0 && joint.confidence <= 1.0)) {
        throw ParseError(where + ": confidence outside [0, 1]");
      }
      frame.joints[j] = joint;
    }
    seq.frames.push_back(frame);
  }
  if (!(seq.fps > 0.0)) throw ParseError(origin + ": fps must be positive");
  return seq;
}

SkeletonSequence parse_pose_file(const std::filesystem::path& path, const JointSelection& selection) {
  return parse_pose_text(read_file(path), selection, path.string());
}

std::string serialize_pose_text(const SkeletonSequence& seq, const JointSelection& selection) {
  selection.validate();
  std::vector<std::ptrdiff_t> slot(selection.source_count, -1);
  for (std::size_t j = 0; j < kNumJoints; ++j) slot[selection.indices[j]] = static_cast<std::ptrdiff_t>(j);
  std::string out;
  for (const auto& frame : seq.frames) {
    json rec;
    rec["subject_id"] = seq.subject_id;
    rec["frame_index"] = frame.frame_index;
    if (seq.fps != kDefaultFps) rec["fps"] = seq.fps;
    json kps = json::array();
    for (std::size_t s = 0; s < selection.source_count; ++s) {
      if (slot[s] < 0) {
        kps.push_back({0.0, 0.0, 0.0});
      } else {
        const Joint& jt = frame.joints[static_cast<std::size_t>(slot[s])];
        kps.push_back({jt.x, jt.y, jt.confidence});
      }
    }
    rec["keypoints"] = std::move(kps);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void write_pose_file(const std::filesystem::path& path, const SkeletonSequence& seq, const JointSelection& selection) {
  write_file(path, serialize_pose_text(seq, selection));
}

AnnotationMap parse_annotation_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  AnnotationMap out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("subject_id", 0) == 0) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 3) throw ParseError(where + ": expected 3 fields");
    StrokeAnnotation a;
    try {
      std::size_t pos = 0;
      const long long s = std::stoll(fields[1], &pos);
      if (pos != fields[1].size()) throw std::invalid_argument("trailing");
      const long long e = std::stoll(fields[2], &pos);
      if (pos != fields[2].size()) throw std::invalid_argument("trailing");
      if (s < 0 || e < 0) throw std::invalid_argument("negative");
      a.start_frame = static_cast<std::size_t>(s);
      a.end_frame = static_cast<std::size_t>(e);
    } catch (const std::exception&) {
      throw ParseError(where + ": invalid frame numbers");
    }
    if (a.start_frame >= a.end_frame) throw InvalidAnnotationError(where + ": stroke start must precede end");
    out[fields[0]].push_back(a);
  }
  for (auto& [subject, strokes] : out) {
    std::sort(strokes.begin(), strokes.end(),
              [](const StrokeAnnotation& a, const StrokeAnnotation& b) { return a.start_frame < b.start_frame; });
    for (std::size_t i = 1; i < strokes.size(); ++i) {
      if (strokes[i].start_frame < strokes[i - 1].end_frame) {
        throw InvalidAnnotationError(path.string() + ": overlapping strokes for subject " + subject);
      }
    }
  }
  return out;
}

void write_annotation_file(const std::filesystem::path& path, const AnnotationMap& annotations) {
  std::string out = "subject_id,stroke_start_frame,stroke_end_frame\n";
  for (const auto& [subject, strokes] : annotations) {
    for (const auto& a : strokes) {
      out += subject + "," + std::to_string(a.start_frame) + "," + std::to_string(a.end_frame) + "\n";
    }
  }
  write_file(path, out);
}

SkeletonSequence normalize_coords(const SkeletonSequence& seq, std::size_t center_joint,
                                  std::pair<std::size_t, std::size_t> scale_pair) {
  if (center_joint >= kNumJoints || scale_pair.first >= kNumJoints || scale_pair.second >= kNumJoints) {
    throw RangeError("normalize_coords: joint index out of range");
  }
  double total = 0.0;
  for (const auto& f : seq.frames) {
    const Joint& a = f.joints[scale_pair.first];
    const Joint& b = f.joints[scale_pair.second];
    total += std::hypot(a.x - b.x, a.y - b.y);
  }
  const double scale = seq.frames.empty() ? 0.0 : total / static_cast<double>(seq.frames.size());
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw DegeneratePoseError("subject " + seq.subject_id + ": scale joints coincide over the whole sequence");
  }
  SkeletonSequence out = seq;
  for (auto& f : out.frames) {
    const Joint c = f.joints[center_joint];
    for (auto& j : f.joints) {
      j.x = (j.x - c.x) / scale;
      j.y = (j.y - c.y) / scale;
    }
  }
  return out;
}

}  // namespace gp
