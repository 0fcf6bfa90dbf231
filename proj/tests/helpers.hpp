#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "common.hpp"
#include "nn/tensor.hpp"
#include "pose_io.hpp"

namespace testing {

/// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("gp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

template <typename T>
gp::nn::Tensor<T> random_tensor(gp::nn::Shape shape, gp::Rng& rng, double scale = 1.0) {
  gp::nn::Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(scale * rng.normal());
  return t;
}

/// Frames with every joint at a distinct, frame-dependent position.
inline gp::SkeletonSequence ramp_sequence(const std::string& id, std::size_t frames, std::size_t first = 0) {
  gp::SkeletonSequence s;
  s.subject_id = id;
  s.frames.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    s.frames[f].frame_index = first + f;
    for (std::size_t j = 0; j < gp::kNumJoints; ++j) {
      s.frames[f].joints[j] = {static_cast<double>(j) * 3.0 + static_cast<double>(f), static_cast<double>(j) * 2.0 - 1.0,
                               0.5 + 0.01 * static_cast<double>(j)};
    }
  }
  return s;
}

}  // namespace testing
