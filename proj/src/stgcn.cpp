#include "stgcn.hpp"

#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace gp {

using nlohmann::json;

std::vector<double> normalize_adjacency(const std::vector<double>& a, std::size_t n, double epsilon) {
  if (a.size() != n * n) throw ShapeError("adjacency must be n x n");
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i * n + j] < 0.0) throw DomainError("adjacency entries must be nonnegative");
      deg += a[i * n + j];
    }
    inv_sqrt[i] = 1.0 / std::sqrt(deg + epsilon);
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = inv_sqrt[i] * a[i * n + j] * inv_sqrt[j];
  }
  return out;
}

StGraph build_partitions(const std::vector<Edge>& edges, std::size_t center_joint, std::size_t num_nodes) {
  if (num_nodes == 0 || center_joint >= num_nodes) throw RangeError("center joint outside the graph");
  std::vector<std::vector<std::size_t>> adj(num_nodes);
  for (const auto& [a, b] : edges) {
    if (a >= num_nodes || b >= num_nodes) throw RangeError("edge endpoint outside the graph");
    if (a == b) continue;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  constexpr std::size_t unreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(num_nodes, unreached);
  std::queue<std::size_t> frontier;
  dist[center_joint] = 0;
  frontier.push(center_joint);
  while (!frontier.empty()) {
    const std::size_t v = frontier.front();
    frontier.pop();
    for (std::size_t u : adj[v]) {
      if (dist[u] == unreached) {
        dist[u] = dist[v] + 1;
        frontier.push(u);
      }
    }
  }
  for (std::size_t v = 0; v < num_nodes; ++v) {
    if (dist[v] == unreached) {
      throw ConnectivityError("joint " + std::to_string(v) + " is not connected to center joint " +
                              std::to_string(center_joint));
    }
  }

  StGraph g;
  g.num_nodes = num_nodes;
  g.center_joint = center_joint;
  g.edges = edges;
  g.hop_distance = dist;
  for (auto& p : g.partitions) p.assign(num_nodes * num_nodes, 0.0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    g.partitions[static_cast<std::size_t>(Partition::root)][i * num_nodes + i] = 1.0;
    for (std::size_t j : adj[i]) {
      Partition k = Partition::root;
      if (dist[j] < dist[i]) k = Partition::centripetal;
      else if (dist[j] > dist[i]) k = Partition::centrifugal;
      g.partitions[static_cast<std::size_t>(k)][i * num_nodes + j] = 1.0;
    }
  }

  std::vector<double> total(num_nodes * num_nodes, 0.0);
  for (const auto& p : g.partitions) {
    for (std::size_t e = 0; e < total.size(); ++e) total[e] += p[e];
  }
  const double epsilon = 1e-6;
  std::vector<double> inv_sqrt(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < num_nodes; ++j) deg += total[i * num_nodes + j];
    inv_sqrt[i] = 1.0 / std::sqrt(deg + epsilon);
  }
  for (std::size_t k = 0; k < kNumPartitions; ++k) {
    g.normalized[k].assign(num_nodes * num_nodes, 0.0);
    for (std::size_t i = 0; i < num_nodes; ++i) {
      for (std::size_t j = 0; j < num_nodes; ++j) {
        const double a = g.partitions[k][i * num_nodes + j];
        if (a == 0.0) continue;
        const double w = inv_sqrt[i] * a * inv_sqrt[j];
        g.normalized[k][i * num_nodes + j] = w;
        g.support.push_back({k, i, j, w});
      }
    }
  }
  g.joint_names.resize(num_nodes);
  return g;
}

StGraph StGraph::upper_body_default() {
  // Node order follows JointSelection::whole_body_default().
  std::vector<Edge> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 6}, {5, 7}, {6, 17}};
  for (std::size_t root : {std::size_t{7}, std::size_t{17}}) {
    edges.push_back({root, root + 1});      // thumb tip
    for (std::size_t f = 0; f < 4; ++f) {  // index, middle, ring, pinky: root → mcp → tip
      const std::size_t mcp = root + 2 + 2 * f;
      edges.push_back({root, mcp});
      edges.push_back({mcp, mcp + 1});
    }
  }
  StGraph g = build_partitions(edges, 0, kNumJoints);
  const auto sel = JointSelection::whole_body_default();
  g.joint_names.assign(sel.names.begin(), sel.names.end());
  return g;
}

std::string StGraph::canonical_json() const {
  json j;
  j["format"] = "gesturephase.graph/1";
  j["num_nodes"] = num_nodes;
  j["center_joint"] = center_joint;
  j["joint_names"] = joint_names;
  json e = json::array();
  for (const auto& [a, b] : edges) e.push_back({a, b});
  j["edges"] = e;
  return j.dump();
}

std::string StGraph::hash() const { return hex64(fnv1a64(canonical_json())); }

void StGraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << json::parse(canonical_json()).dump(2) << "\n";
}

StGraph StGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const json j = json::parse(ss.str());
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    StGraph g = build_partitions(edges, j.at("center_joint").get<std::size_t>(), j.at("num_nodes").get<std::size_t>());
    if (j.contains("joint_names")) {
      g.joint_names = j.at("joint_names").get<std::vector<std::string>>();
      if (g.joint_names.size() != g.num_nodes) throw ShapeError(path.string() + ": joint_names length mismatch");
    }
    return g;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace gp
