#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "nn/layers.hpp"
#include "pose_io.hpp"
#include "windowing.hpp"

namespace gp {

using nn::Grads;
using nn::ParamSet;
using nn::Shape;
using nn::Tensor;

/// Spatial-configuration subsets of each node's neighborhood.
enum class Partition : std::size_t { root = 0, centripetal = 1, centrifugal = 2 };
inline constexpr std::size_t kNumPartitions = 3;

using Edge = std::pair<std::size_t, std::size_t>;

/// Skeleton graph with its partitioned adjacency. `partitions[k]` is a
/// row-major num_nodes x num_nodes 0/1 matrix; entry (i, j) set means node
/// j contributes to node i through subset k.
struct StGraph {
  std::size_t num_nodes = 0;
  std::size_t center_joint = 0;
  std::vector<Edge> edges;
  std::vector<std::string> joint_names;
  std::vector<std::size_t> hop_distance;
  std::array<std::vector<double>, kNumPartitions> partitions;
  /// D^-1/2 A_k D^-1/2 with D the degree of the summed partitions.
  std::array<std::vector<double>, kNumPartitions> normalized;

  struct SupportEntry {
    std::size_t k, i, j;
    double weight;  // normalized adjacency value
  };
  /// Nonzero entries of the partitions, ordered by (k, i, j).
  std::vector<SupportEntry> support;

  double partition(std::size_t k, std::size_t i, std::size_t j) const { return partitions[k][i * num_nodes + j]; }

  /// Anatomical tree over the default 27-joint layout, centered on the nose.
  static StGraph upper_body_default();
  static StGraph load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string canonical_json() const;
  std::string hash() const;
};

/// Splits each neighborhood (neighbors plus self) by hop distance to
/// `center_joint`. Throws ConnectivityError for disconnected graphs.
StGraph build_partitions(const std::vector<Edge>& edges, std::size_t center_joint, std::size_t num_nodes = kNumJoints);

/// D^-1/2 A D^-1/2 with D_ii = Σ_j A_ij + epsilon.
std::vector<double> normalize_adjacency(const std::vector<double>& a, std::size_t n, double epsilon = 1e-6);

/// One spatial graph convolution followed by a temporal convolution:
/// out = act(tconv(act(Σ_k (Â_k ⊙ M_k) x W_k + b_s)) + b_t [+ x]).
struct StgcnBlock {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t temporal_kernel = 5;
  bool residual = false;
  nn::Activation activation = nn::Activation::relu;

  std::size_t spatial_w = 0;   // (K, c_in, c_out)
  std::size_t spatial_b = 0;   // (c_out)
  std::size_t importance = 0;  // (K, V, V), ones at init
  std::size_t temporal_w = 0;  // (L, c_out, c_out)
  std::size_t temporal_b = 0;  // (c_out)

  template <typename T>
  struct Cache {
    Tensor<T> input;
    Tensor<T> projected;  // (K, rows, c_out)
    Tensor<T> spatial_pre;
    Tensor<T> spatial_act;
    Tensor<T> output_pre;
  };

  template <typename T>
  static StgcnBlock create(ParamSet<T>& params, const std::string& name, std::size_t c_in, std::size_t c_out,
                           std::size_t num_nodes, std::size_t temporal_kernel, bool residual,
                           nn::Activation activation);

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const;

  /// x: (N, F, V, c_in) → (N, F, V, c_out); windows never mix.
  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const StGraph& graph, const Tensor<T>& x, Cache<T>* cache) const;

  /// Returns dx when `need_input_grad`, else an empty tensor.
  template <typename T>
  Tensor<T> backward(const ParamSet<T>& params, const StGraph& graph, const Cache<T>& cache, const Tensor<T>& dy,
                     Grads<T>& grads, bool need_input_grad) const;
};

struct StgcnConfig {
  std::vector<std::size_t> channels = {16, 32, 64};
  std::size_t temporal_kernel = 5;
  nn::Activation activation = nn::Activation::relu;

  std::size_t embed_dim() const { return channels.at(channels.size() - 1); }
};

/// Block stack plus global average pooling over frames and joints.
struct StgcnEmbedder {
  std::vector<StgcnBlock> blocks;

  template <typename T>
  struct Cache {
    std::vector<StgcnBlock::Cache<T>> blocks;
    Shape last_shape;
  };

  template <typename T>
  static StgcnEmbedder create(ParamSet<T>& params, const StgcnConfig& cfg, std::size_t num_nodes);

  template <typename T>
  void init(ParamSet<T>& params, Rng& rng) const {
    for (const auto& b : blocks) b.init(params, rng);
  }

  /// windows: (N, F, V, 3) → embeddings (N, d).
  template <typename T>
  Tensor<T> forward(const ParamSet<T>& params, const StGraph& graph, const Tensor<T>& windows, Cache<T>* cache) const;

  template <typename T>
  void backward(const ParamSet<T>& params, const StGraph& graph, const Cache<T>& cache, const Tensor<T>& d_embed,
                Grads<T>& grads) const;
};

}  // namespace gp

#include "stgcn_impl.hpp"
