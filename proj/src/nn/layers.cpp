#include "nn/layers.hpp"

namespace gp::nn {

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity" || s == "none") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

}  // namespace gp::nn
