#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nn/params.hpp"

namespace gp {

struct LayerCheck {
  std::string layer;
  std::uint64_t seed = 0;
  nn::GradCheckReport report;
  /// Draws rejected because a rectifier input sat within the kink margin.
  std::size_t redraws = 0;
  bool passed = false;
  bool gating = true;
};

struct GradCheckSuiteResult {
  double threshold = 1e-5;
  std::vector<LayerCheck> checks;

  bool passed() const;
  double max_error() const;
  nlohmann::json to_json() const;
};

/// Layer types whose checks decide pass/fail, in run order.
const std::vector<std::string>& gradcheck_layers();
/// Whole encoder and whole model. Reported only: their gradients have
/// entries small enough that central differences lose most digits to
/// roundoff, which the relative-error metric cannot tell from a bug.
const std::vector<std::string>& gradcheck_composites();

/// Central-difference check of one layer type at 64-bit on small random
/// shapes. Inputs are treated as a parameter block so input gradients are
/// checked too. Layers with rectifiers redraw their values until every
/// rectifier input is at least `kKinkMargin` from zero, since a difference
/// quotient straddling the kink measures nothing.
inline constexpr double kKinkMargin = 1e-3;

LayerCheck check_layer(const std::string& layer, std::uint64_t seed, double threshold = 1e-5);

/// Every layer type for seeds base_seed .. base_seed + seeds - 1.
GradCheckSuiteResult run_gradcheck_suite(std::size_t seeds, std::uint64_t base_seed = 0, double threshold = 1e-5,
                                         bool composites = true);

}  // namespace gp
