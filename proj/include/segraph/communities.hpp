#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "segraph/ingest.hpp"

namespace segraph {

// Undirected weighted graph over dense indices.
struct WeightedGraph {
  std::vector<NodeId> ids;                                 // dense index -> node id (ascending)
  std::vector<std::vector<std::pair<int, double>>> adj;    // symmetric, no self-loops

  std::size_t size() const { return ids.size(); }
  double total_weight() const;  // sum over undirected edges
};

// Weight of {u, v} is the total number of emails in either direction.
// Self-loops are dropped.
WeightedGraph undirected_skeleton(const ActivityGraph& graph);

double modularity(const WeightedGraph& graph, std::span<const int> community);

// Multi-level greedy modularity maximisation (Louvain). Nodes are visited in
// ascending index order, moves require a strict gain, and ties between
// candidate communities go to the lowest community id. Labels are compacted so
// that communities are numbered by their smallest member.
std::vector<int> louvain(const WeightedGraph& graph);

using Partition = std::map<NodeId, int>;

// Throws DataError on an empty graph.
Partition detect_communities(const ActivityGraph& graph);

}  // namespace segraph
