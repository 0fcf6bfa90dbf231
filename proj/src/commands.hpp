#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "model.hpp"
#include "pose_io.hpp"

namespace gp::cmd {

namespace fs = std::filesystem;

using Log = std::function<void(const std::string&)>;

/// A trained model with everything needed to rebuild its input pipeline.
struct LoadedModel {
  RunConfig config;
  std::string config_hash;
  JointSelection selection;
  std::unique_ptr<Model<float>> model;
};

/// Checkpoint layout: manifest.json (run config, input standardization,
/// seed), params.bin, graph.json and joint_selection.json.
void save_model(const fs::path& dir, const Model<float>& model, const RunConfig& config,
                const JointSelection& selection);
LoadedModel load_model(const fs::path& dir);

/// Each command returns a JSON summary stamped with config hash and seed.
nlohmann::json synth(const RunConfig& config, const fs::path& out_dir, const Log& log = {});

nlohmann::json prepare(const RunConfig& config, const fs::path& poses_dir, const fs::path& annotations,
                       const fs::path& out_dir, const Log& log = {});

/// Trains on every subject of the prepared dataset, or on `subjects`.
nlohmann::json train(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                     const std::vector<std::string>& subjects = {}, const Log& log = {});

/// Scores a model on the prepared dataset (all subjects, or `subjects`).
nlohmann::json evaluate(const LoadedModel& model, const fs::path& data_dir, const fs::path& out_file, unsigned jobs,
                        const std::vector<std::string>& subjects = {}, const Log& log = {});

/// Writes report.json (deterministic), log.jsonl (per-epoch timings) and
/// summary.txt (mean ± std table).
nlohmann::json crossval(const RunConfig& config, const fs::path& data_dir, const fs::path& out_dir,
                        const Log& log = {});

/// Per-window labels plus gesture units with phase sub-spans.
nlohmann::json predict(const LoadedModel& model, const fs::path& poses_file, const fs::path& out_file,
                       const Log& log = {});
nlohmann::json predict_sequence(const LoadedModel& model, const SkeletonSequence& raw);

/// Result carries "passed"; callers decide how to report a breach.
nlohmann::json gradcheck(const RunConfig& config, std::size_t seeds, const fs::path& out_file, const Log& log = {});

/// Mean ± std table of stroke, unit and per-phase scores.
std::string format_aggregate_table(const nlohmann::json& report);

}  // namespace gp::cmd
