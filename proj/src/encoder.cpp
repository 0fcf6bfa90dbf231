#include "encoder.hpp"

namespace gp {

PositionalMode parse_positional(const std::string& s) {
  if (s == "sinusoidal") return PositionalMode::sinusoidal;
  if (s == "learned") return PositionalMode::learned;
  if (s == "none") return PositionalMode::none;
  throw ConfigError("unknown positional encoding '" + s + "'");
}

std::string to_string(PositionalMode m) {
  switch (m) {
    case PositionalMode::sinusoidal: return "sinusoidal";
    case PositionalMode::learned: return "learned";
    case PositionalMode::none: return "none";
  }
  return "none";
}

void EncoderConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw ConfigError("encoder width " + std::to_string(d_model) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (layers == 0) throw ConfigError("encoder needs at least one layer");
  if (ffn_dim == 0) throw ConfigError("encoder feedforward width must be positive");
  if (max_len < 40) throw ConfigError("encoder max_len must be at least 40");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

}  // namespace gp
