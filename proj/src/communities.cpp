#include "segraph/communities.hpp"

#include <algorithm>
#include <numeric>

namespace segraph {

double WeightedGraph::total_weight() const {
  double sum = 0;
  for (const auto& row : adj)
    for (const auto& [_, w] : row) sum += w;
  return sum / 2.0;
}

WeightedGraph undirected_skeleton(const ActivityGraph& graph) {
  WeightedGraph g;
  g.ids = graph.nodes();
  std::map<NodeId, int> index;
  for (std::size_t i = 0; i < g.ids.size(); ++i) index[g.ids[i]] = static_cast<int>(i);
  std::map<std::pair<int, int>, double> weights;
  for (const auto& [pair, days] : graph.edges()) {
    if (pair.first == pair.second) continue;
    double total = 0;
    for (const auto& [_, c] : days) total += c;
    const int a = index.at(pair.first), b = index.at(pair.second);
    weights[{std::min(a, b), std::max(a, b)}] += total;
  }
  g.adj.resize(g.ids.size());
  for (const auto& [key, w] : weights) {
    g.adj[static_cast<std::size_t>(key.first)].emplace_back(key.second, w);
    g.adj[static_cast<std::size_t>(key.second)].emplace_back(key.first, w);
  }
  for (auto& row : g.adj) std::sort(row.begin(), row.end());
  return g;
}

double modularity(const WeightedGraph& graph, std::span<const int> community) {
  const double m2 = 2.0 * graph.total_weight();
  if (m2 == 0) return 0.0;
  double internal = 0;
  std::map<int, double> tot;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    double degree = 0;
    for (const auto& [j, w] : graph.adj[i]) {
      degree += w;
      if (community[static_cast<std::size_t>(j)] == community[i]) internal += w;
    }
    tot[community[i]] += degree;
  }
  double expected = 0;
  for (const auto& [_, t] : tot) expected += t * t;
  return (internal - expected / m2) / m2;
}

namespace {

struct Level {
  std::vector<std::vector<std::pair<int, double>>> adj;  // no self-loops
  std::vector<double> degree;                             // includes internal weight of merged nodes
};

// One local-moving phase; returns community per node and whether anything moved.
bool local_moving(const Level& level, double m2, std::vector<int>& community) {
  const auto n = level.adj.size();
  community.resize(n);
  std::iota(community.begin(), community.end(), 0);
  std::vector<double> tot = level.degree;
  std::vector<double> link(n, 0.0);
  std::vector<int> touched;
  bool any_move = false;
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double ki = level.degree[i];
      if (ki == 0) continue;
      const int own = community[i];
      touched.clear();
      for (const auto& [j, w] : level.adj[i]) {
        const int c = community[static_cast<std::size_t>(j)];
        if (link[static_cast<std::size_t>(c)] == 0) touched.push_back(c);
        link[static_cast<std::size_t>(c)] += w;
      }
      tot[static_cast<std::size_t>(own)] -= ki;
      auto gain = [&](int c) { return link[static_cast<std::size_t>(c)] - tot[static_cast<std::size_t>(c)] * ki / m2; };
      const double own_gain = gain(own);
      int best = own;
      double best_gain = own_gain;
      std::sort(touched.begin(), touched.end());
      for (int c : touched) {
        if (c == own) continue;
        const double g = gain(c);
        if (g > best_gain + 1e-12 * m2) {
          best_gain = g;
          best = c;
        }
      }
      tot[static_cast<std::size_t>(best)] += ki;
      if (best != own) {
        community[i] = best;
        improved = true;
        any_move = true;
      }
      for (int c : touched) link[static_cast<std::size_t>(c)] = 0;
    }
  }
  return any_move;
}

// Relabels communities 0..k-1 ordered by first appearance.
int compact(std::vector<int>& community) {
  std::map<int, int> relabel;
  for (auto& c : community) {
    auto [it, _] = relabel.try_emplace(c, static_cast<int>(relabel.size()));
    c = it->second;
  }
  return static_cast<int>(relabel.size());
}

}  // namespace

std::vector<int> louvain(const WeightedGraph& graph) {
  const auto n = graph.size();
  Level level;
  level.adj = graph.adj;
  level.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [_, w] : graph.adj[i]) level.degree[i] += w;
  const double m2 = std::accumulate(level.degree.begin(), level.degree.end(), 0.0);

  std::vector<int> membership(n);
  std::iota(membership.begin(), membership.end(), 0);
  if (m2 == 0) return membership;

  while (true) {
    std::vector<int> community;
    const bool moved = local_moving(level, m2, community);
    const int k = compact(community);
    for (auto& c : membership) c = community[static_cast<std::size_t>(c)];
    if (!moved || k == static_cast<int>(level.adj.size())) break;

    Level next;
    next.adj.resize(static_cast<std::size_t>(k));
    next.degree.assign(static_cast<std::size_t>(k), 0.0);
    std::vector<std::map<int, double>> merged(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < level.adj.size(); ++i) {
      const int ci = community[i];
      next.degree[static_cast<std::size_t>(ci)] += level.degree[i];
      for (const auto& [j, w] : level.adj[i]) {
        const int cj = community[static_cast<std::size_t>(j)];
        if (ci != cj) merged[static_cast<std::size_t>(ci)][cj] += w;
      }
    }
    for (int c = 0; c < k; ++c) {
      for (const auto& [d, w] : merged[static_cast<std::size_t>(c)]) next.adj[static_cast<std::size_t>(c)].emplace_back(d, w);
    }
    level = std::move(next);
  }
  compact(membership);
  return membership;
}

Partition detect_communities(const ActivityGraph& graph) {
  if (graph.node_count() == 0) throw DataError("detect_communities: empty graph");
  const auto skeleton = undirected_skeleton(graph);
  const auto membership = louvain(skeleton);
  Partition partition;
  for (std::size_t i = 0; i < skeleton.size(); ++i) partition[skeleton.ids[i]] = membership[i];
  return partition;
}

}  // namespace segraph
