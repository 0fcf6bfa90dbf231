#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "stgcn.hpp"

using namespace gp;

namespace {

// Straight loop-per-index evaluation of one block, for comparison with the
// matrix implementation.
Tensor<double> naive_block(const ParamSet<double>& p, const StgcnBlock& b, const StGraph& g, const Tensor<double>& x) {
  const std::size_t N = x.dim(0), F = x.dim(1), V = x.dim(2), ci = b.c_in, co = b.c_out, L = b.temporal_kernel;
  const auto& W = p.value(b.spatial_w);
  const auto& bs = p.value(b.spatial_b);
  const auto& M = p.value(b.importance);
  const auto& TW = p.value(b.temporal_w);
  const auto& bt = p.value(b.temporal_b);
  const auto act = [&](double v) { return b.activation == nn::Activation::relu ? std::max(0.0, v) : v; };
  auto X = [&](std::size_t n, std::size_t f, std::size_t v, std::size_t c) { return x[((n * F + f) * V + v) * ci + c]; };

  std::vector<double> h(N * F * V * co);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < V; ++i)
        for (std::size_t c = 0; c < co; ++c) {
          double z = bs[c];
          for (std::size_t k = 0; k < kNumPartitions; ++k)
            for (std::size_t j = 0; j < V; ++j) {
              const double a = g.normalized[k][i * V + j] * M[(k * V + i) * V + j];
              for (std::size_t cc = 0; cc < ci; ++cc) z += a * X(n, f, j, cc) * W[(k * ci + cc) * co + c];
            }
          h[((n * F + f) * V + i) * co + c] = act(z);
        }

  Tensor<double> out({N, F, V, co});
  const long pad = static_cast<long>(L / 2);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < V; ++i)
        for (std::size_t c = 0; c < co; ++c) {
          double o = bt[c];
          for (std::size_t l = 0; l < L; ++l) {
            const long src = static_cast<long>(f) + static_cast<long>(l) - pad;
            if (src < 0 || src >= static_cast<long>(F)) continue;
            for (std::size_t cc = 0; cc < co; ++cc) {
              o += h[((n * F + static_cast<std::size_t>(src)) * V + i) * co + cc] * TW[(l * co + cc) * co + c];
            }
          }
          if (b.residual) o += X(n, f, i, c);
          out[((n * F + f) * V + i) * co + c] = act(o);
        }
  return out;
}

// Single-partition identity graph over `n` nodes.
StGraph identity_graph(std::size_t n) {
  StGraph g;
  g.num_nodes = n;
  for (std::size_t k = 0; k < kNumPartitions; ++k) {
    g.partitions[k].assign(n * n, 0.0);
    g.normalized[k].assign(n * n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    g.partitions[0][i * n + i] = 1.0;
    g.normalized[0][i * n + i] = 1.0;
    g.support.push_back({0, i, i, 1.0});
  }
  return g;
}

void randomize(ParamSet<double>& p, Rng& rng, double scale = 0.5) {
  for (auto& b : p) {
    for (auto& v : b.value.values()) v = scale * rng.normal();
  }
}

}  // namespace

TEST_CASE("build_partitions: path graph centered on its middle node") {
  const StGraph g = build_partitions({{0, 1}, {1, 2}}, 1, 3);
  const auto root = static_cast<std::size_t>(Partition::root);
  const auto in = static_cast<std::size_t>(Partition::centripetal);
  const auto out = static_cast<std::size_t>(Partition::centrifugal);
  CHECK(g.partition(root, 1, 1) == 1.0);
  CHECK(g.partition(out, 1, 0) == 1.0);
  CHECK(g.partition(out, 1, 2) == 1.0);
  CHECK(g.partition(root, 0, 0) == 1.0);
  CHECK(g.partition(in, 0, 1) == 1.0);
  CHECK(g.partition(out, 0, 1) == 0.0);
  CHECK(g.hop_distance == std::vector<std::size_t>{1, 0, 1});
}

TEST_CASE("build_partitions: single node and disconnected graphs") {
  const StGraph one = build_partitions({}, 0, 1);
  CHECK(one.partitions[0] == std::vector<double>{1.0});
  CHECK(one.partitions[1] == std::vector<double>{0.0});
  CHECK(one.partitions[2] == std::vector<double>{0.0});
  CHECK_THROWS_AS(build_partitions({{0, 1}}, 0, 3), ConnectivityError);
  CHECK_THROWS_AS(build_partitions({{0, 5}}, 0, 3), RangeError);
}

TEST_CASE("default skeleton graph: partitions are disjoint and sum to adjacency with self loops") {
  const StGraph g = StGraph::upper_body_default();
  REQUIRE(g.num_nodes == kNumJoints);
  CHECK(g.edges.size() == kNumJoints - 1);
  std::vector<double> adj(kNumJoints * kNumJoints, 0.0);
  for (std::size_t i = 0; i < kNumJoints; ++i) adj[i * kNumJoints + i] = 1.0;
  for (const auto& [a, b] : g.edges) adj[a * kNumJoints + b] = adj[b * kNumJoints + a] = 1.0;
  for (std::size_t e = 0; e < adj.size(); ++e) {
    double sum = 0;
    int nonzero = 0;
    for (const auto& p : g.partitions) {
      CHECK(p[e] >= 0.0);
      sum += p[e];
      nonzero += p[e] != 0.0;
    }
    CHECK(sum == adj[e]);
    CHECK(nonzero <= 1);
  }
}

TEST_CASE("graph files round-trip with a stable hash") {
  testing::TempDir dir("graph");
  const StGraph g = StGraph::upper_body_default();
  g.save(dir / "g.json");
  const StGraph back = StGraph::load(dir / "g.json");
  CHECK(back.hash() == g.hash());
  CHECK(back.partitions == g.partitions);
  CHECK(back.joint_names == g.joint_names);
  const StGraph other = build_partitions(g.edges, 1, kNumJoints);
  CHECK(other.hash() != g.hash());
}

TEST_CASE("normalize_adjacency") {
  const auto one = normalize_adjacency({1.0}, 1);
  CHECK(one[0] == doctest::Approx(1.0).epsilon(1e-5));
  const auto swap = normalize_adjacency({0, 1, 1, 0}, 2);
  CHECK(swap[0] == 0.0);
  CHECK(swap[1] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(swap[2] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(swap[3] == 0.0);
  for (double v : normalize_adjacency(std::vector<double>(9, 0.0), 3)) CHECK(v == 0.0);
  CHECK_THROWS_AS(normalize_adjacency({1, -1, 0, 1}, 2), DomainError);
}

TEST_CASE("block: identity setup reproduces its input") {
  const StGraph g = identity_graph(3);
  ParamSet<double> p;
  const auto b = StgcnBlock::create(p, "b", 3, 3, 3, 3, false, nn::Activation::identity);
  auto& W = p.value(b.spatial_w);
  auto& TW = p.value(b.temporal_w);
  p.value(b.importance).fill(1.0);
  for (std::size_t c = 0; c < 3; ++c) {
    W[(0 * 3 + c) * 3 + c] = 1.0;
    TW[(1 * 3 + c) * 3 + c] = 1.0;  // centered tap
  }
  Rng rng(1);
  const Tensor<double> x = testing::random_tensor<double>({2, 4, 3, 3}, rng);
  StgcnBlock::Cache<double> cache;
  const Tensor<double> y = b.forward(p, g, x, &cache);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-15));

  SUBCASE("zero importance mask annihilates the spatial output") {
    p.value(b.importance).zero();
    StgcnBlock::Cache<double> c2;
    b.forward(p, g, x, &c2);
    for (double v : c2.spatial_pre.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("block: agrees with the loop reference on random instances") {
  const StGraph g = build_partitions({{0, 1}, {1, 2}}, 1, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    for (bool residual : {false, true}) {
      ParamSet<double> p;
      const std::size_t c_in = residual ? 4 : 3;
      const auto b = StgcnBlock::create(p, "b", c_in, 4, 3, 3, residual,
                                        seed % 2 ? nn::Activation::relu : nn::Activation::identity);
      CHECK(b.residual == residual);
      randomize(p, rng);
      const Tensor<double> x = testing::random_tensor<double>({2, 4, 3, c_in}, rng);
      StgcnBlock::Cache<double> cache;
      const Tensor<double> y = b.forward(p, g, x, &cache);
      const Tensor<double> ref = naive_block(p, b, g, x);
      for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) <= 1e-6);
    }
  }
}

TEST_CASE("block: shape errors and even kernels") {
  const StGraph g = build_partitions({{0, 1}}, 0, 2);
  ParamSet<double> p;
  const auto b = StgcnBlock::create(p, "b", 3, 4, 2, 3, false, nn::Activation::relu);
  StgcnBlock::Cache<double> cache;
  CHECK_THROWS_AS(b.forward(p, g, Tensor<double>({1, 4, 3, 3}), &cache), ShapeError);
  CHECK_THROWS_AS(b.forward(p, g, Tensor<double>({1, 4, 2, 2}), &cache), ShapeError);
  ParamSet<double> q;
  CHECK_THROWS_AS(StgcnBlock::create(q, "e", 3, 4, 2, 4, false, nn::Activation::relu), ConfigError);
}

TEST_CASE("embedder: zero input, determinism and pooling") {
  const StGraph g = StGraph::upper_body_default();
  ParamSet<double> p;
  const StgcnConfig cfg{{4, 6}, 3, nn::Activation::relu};
  const auto emb = StgcnEmbedder::create(p, cfg, g.num_nodes);
  Rng init(3);
  emb.init(p, init);
  StgcnEmbedder::Cache<double> cache;

  const Tensor<double> zeros({2, 18, kNumJoints, 3});
  const Tensor<double> e0 = emb.forward(p, g, zeros, &cache);
  REQUIRE(e0.shape() == Shape{2, 6});
  for (double v : e0.values()) CHECK(v == 0.0);

  Rng rng(8);
  const Tensor<double> one = testing::random_tensor<double>({1, 18, kNumJoints, 3}, rng);
  Tensor<double> two({2, 18, kNumJoints, 3});
  std::copy(one.data(), one.data() + one.size(), two.data());
  std::copy(one.data(), one.data() + one.size(), two.data() + one.size());
  const Tensor<double> e = emb.forward(p, g, two, &cache);
  for (std::size_t c = 0; c < 6; ++c) CHECK(e.at(0, c) == e.at(1, c));

  // Pooling oracle: run the blocks by hand and average explicitly.
  Tensor<double> h = one;
  for (const auto& blk : emb.blocks) {
    StgcnBlock::Cache<double> bc;
    h = blk.forward(p, g, h, &bc);
  }
  for (std::size_t c = 0; c < 6; ++c) {
    double s = 0;
    for (std::size_t f = 0; f < 18; ++f)
      for (std::size_t v = 0; v < kNumJoints; ++v) s += h[(f * kNumJoints + v) * 6 + c];
    CHECK(e.at(0, c) == doctest::Approx(s / (18.0 * kNumJoints)).epsilon(1e-12));
  }
}
