#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "stgcn.hpp"
#include "synth.hpp"

namespace gp {

/// Every tunable of a run in one JSON document. Missing keys keep their
/// defaults; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned jobs = 1;

  PrepareOptions data;
  std::string joint_selection_file;  // empty: built-in whole-body layout
  std::string graph_file;            // empty: built-in upper-body tree

  ModelConfig model;
  TrainConfig train;

  std::size_t folds = 5;
  std::vector<ModelVariant> crossval_variants;  // empty: all eight

  SynthConfig synth;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// FNV-1a over the resolved configuration, excluding `jobs`.
  std::string hash() const;

  void validate() const;

  JointSelection joint_selection() const;
  StGraph graph() const;
  std::vector<ModelVariant> variants_for_crossval() const;
  /// Seed-stamped copies of the nested configs.
  TrainConfig train_config() const;
  SynthConfig synth_config() const;
};

}  // namespace gp
