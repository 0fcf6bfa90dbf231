#include "nn/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gp::nn {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

void LrSchedule::validate() const {
  if (!(base_lr >= 0.0) || !(decay_factor > 0.0)) throw ConfigError("learning rate and decay factor must be positive");
  if (warmup_epochs > decay_epoch) throw ConfigError("warmup must end before the learning-rate decay");
}

double lr_at(const LrSchedule& s, std::size_t epoch) {
  if (epoch >= s.total_epochs) {
    throw RangeError("epoch " + std::to_string(epoch) + " outside schedule of " + std::to_string(s.total_epochs));
  }
  if (epoch < s.warmup_epochs) {
    return s.base_lr * static_cast<double>(epoch + 1) / static_cast<double>(s.warmup_epochs);
  }
  if (epoch < s.decay_epoch) return s.base_lr;
  return s.base_lr / s.decay_factor;
}

GradCheckReport grad_check(const LossFn& loss, ParamSet<double>& params, double epsilon) {
  auto scalar = [&](bool with_grad) {
    const Tensor<double> l = loss(params, with_grad);
    if (l.size() != 1) throw ContractError("grad_check: loss must be a scalar, got shape " + shape_string(l.shape()));
    return l[0];
  };
  params.zero_grads();
  scalar(true);
  GradCheckReport report;
  for (auto& block : params) {
    const Tensor<double> analytic = block.grad;
    for (std::size_t i = 0; i < block.value.size(); ++i) {
      const double saved = block.value[i];
      block.value[i] = saved + epsilon;
      const double up = scalar(false);
      block.value[i] = saved - epsilon;
      const double down = scalar(false);
      block.value[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      double rel = std::abs(a - numeric) / denom;
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      if (rel > report.max_rel_error || report.worst_block.empty()) {
        report = {rel, block.name, i, a, numeric};
      }
    }
  }
  params.zero_grads();
  return report;
}

namespace {

template <typename T>
const char* precision_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
void append_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &v, sizeof(T));
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

template <typename T>
T read_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<U>(p[b]) << (8 * b);
  T v;
  std::memcpy(&v, &bits, sizeof(T));
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
  try {
    return nlohmann::json::parse(slurp(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / "manifest.json").string() + ": " + e.what());
  }
}

template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const ParamSet<T>& params, const CheckpointMeta& meta) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "gesturephase.checkpoint/1";
  manifest["precision"] = precision_name<T>();
  manifest["seed"] = meta.seed;
  manifest["config"] = meta.config;
  std::string blob;
  auto& entries = manifest["params"] = nlohmann::json::array();
  for (const auto& b : params) {
    entries.push_back({{"name", b.name}, {"shape", b.value.shape()}, {"offset", blob.size()}, {"count", b.value.size()}});
    for (T v : b.value.values()) append_le(blob, v);
  }
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

template <typename T>
CheckpointMeta load_checkpoint(const std::filesystem::path& dir, ParamSet<T>& params) {
  const nlohmann::json manifest = read_checkpoint_manifest(dir);
  if (manifest.value("format", "") != "gesturephase.checkpoint/1") throw CompatibilityError("unknown checkpoint format");
  if (manifest.at("precision").get<std::string>() != precision_name<T>()) {
    throw CompatibilityError("checkpoint precision " + manifest.at("precision").get<std::string>() + " does not match");
  }
  const std::string blob = slurp(dir / "params.bin");
  const auto& entries = manifest.at("params");
  if (entries.size() != params.size()) throw CompatibilityError("checkpoint holds a different parameter count");
  for (const auto& e : entries) {
    const std::string name = e.at("name").get<std::string>();
    if (!params.contains(name)) throw CompatibilityError("checkpoint parameter " + name + " unknown to the model");
    auto& block = params[params.index_of(name)];
    if (e.at("shape").get<Shape>() != block.value.shape()) {
      throw CompatibilityError("checkpoint parameter " + name + " has shape " +
                               shape_string(e.at("shape").get<Shape>()) + ", model expects " +
                               shape_string(block.value.shape()));
    }
    const std::size_t offset = e.at("offset").get<std::size_t>();
    const std::size_t count = e.at("count").get<std::size_t>();
    if (count != block.value.size() || offset + count * sizeof(T) > blob.size()) {
      throw CompatibilityError("checkpoint parameter " + name + " is truncated");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    for (std::size_t i = 0; i < count; ++i) block.value[i] = read_le<T>(p + i * sizeof(T));
    block.grad.zero();
  }
  CheckpointMeta meta;
  meta.config = manifest.at("config");
  meta.seed = manifest.at("seed").get<std::uint64_t>();
  meta.precision = manifest.at("precision").get<std::string>();
  return meta;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ParamSet<float>&, const CheckpointMeta&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParamSet<double>&, const CheckpointMeta&);
template CheckpointMeta load_checkpoint<float>(const std::filesystem::path&, ParamSet<float>&);
template CheckpointMeta load_checkpoint<double>(const std::filesystem::path&, ParamSet<double>&);

}  // namespace gp::nn
