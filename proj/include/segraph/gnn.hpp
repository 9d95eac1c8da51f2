#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "segraph/ingest.hpp"

namespace segraph {

enum class ProjectionMode {
  kWeeklySummary,  // weekly bins + 5 activity statistics (default, 207 + 5 = 212)
  kWeeklyBin,      // weekly bins only, zero-padded/truncated to input_dim
  kTruncate,       // first input_dim days
  kIdentity,       // raw series; input_dim must equal T
};

struct FeatureProjection {
  ProjectionMode mode = ProjectionMode::kWeeklySummary;
  int input_dim = 212;
};

// Maps a daily series onto the model's input width. Linear in the counts
// except for the summary statistics of kWeeklySummary.
Eigen::VectorXd project_features(const DailySeries& series, const FeatureProjection& projection);

struct SageLayer {
  Eigen::MatrixXd self_weight;      // out x in
  Eigen::MatrixXd neighbor_weight;  // out x in
  Eigen::VectorXd bias;             // out
};

// Three mean-aggregation layers (ReLU on the first two) followed by per-node
// L2 normalisation. Inputs are log1p-compressed projected features.
struct SageModel {
  FeatureProjection projection;
  std::vector<SageLayer> layers;

  int input_dim() const { return static_cast<int>(layers.front().self_weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().self_weight.rows()); }
  std::uint64_t checksum() const;

  friend bool operator==(const SageModel& a, const SageModel& b);
};

struct SageHyper {
  int epochs = 30;
  int steps_per_epoch = 8;
  double lr = 0.01;
  std::array<int, 3> fanout{25, 10, 10};
  int negatives = 5;
  double logit_scale = 5.0;  // applied to cosine logits in the context loss
  std::uint64_t seed = 7;
  std::array<int, 2> hidden{256, 256};
  int output_dim = 128;
};

struct SageTrainLog {
  std::vector<double> epoch_loss;
};

// Unsupervised graph-context training: positives are neighbours on the
// undirected skeleton, negatives are drawn proportional to degree^0.75.
// Throws DataError when the graph has no non-loop edges.
SageModel train_sage(const ActivityGraph& graph, const FeatureProjection& projection, const SageHyper& hyper,
                     SageTrainLog* log = nullptr);

class EmbeddingTable {
 public:
  void set(NodeId id, Eigen::VectorXd z) { table_[id] = std::move(z); }
  const Eigen::VectorXd& at(NodeId id) const;
  bool contains(NodeId id) const { return table_.contains(id); }
  std::size_t size() const { return table_.size(); }
  const std::map<NodeId, Eigen::VectorXd>& entries() const { return table_; }

 private:
  std::map<NodeId, Eigen::VectorXd> table_;
};

// Inductive inference over the given (possibly augmented) graph. Each output
// depends only on the node's 3-hop neighbourhood. Throws DataError for ids
// missing from the graph.
EmbeddingTable embed_nodes(const SageModel& model, const ActivityGraph& graph, std::span<const NodeId> nodes);
EmbeddingTable embed_all(const SageModel& model, const ActivityGraph& graph);

// max(0, cos(a, b)). Throws NumericError on a zero vector.
double cosine_sim01(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

void save_model(const SageModel& model, const std::string& path);
SageModel load_model(const std::string& path);

// Undirected skeleton without self-loops, neighbour lists sorted by id.
std::map<NodeId, std::vector<NodeId>> undirected_neighbors(const ActivityGraph& graph);

}  // namespace segraph
