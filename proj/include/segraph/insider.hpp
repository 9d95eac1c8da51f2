#pragma once

#include <cstdint>
#include <deque>
#include <set>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "segraph/ingest.hpp"
#include "segraph/providers.hpp"
#include "segraph/scoring.hpp"

namespace segraph {

inline constexpr std::size_t kProfileWindow = 50;

struct InsiderConfig {
  int n_est = 30;            // active send-days required before the scored day
  double threshold = 0.60;   // tau for insider-branch interactions
  bool invert_struct = false;  // use 1 - s_struct in the risk sum

  // Throws ConfigError on negative n_est or a threshold outside [0, 1].
  void validate() const;
};

double insider_threshold(const InsiderConfig& config);

// Nodes of the training-period graph.
std::set<NodeId> training_nodes(const ActivityGraph& training_graph);

// Both endpoints are training-period nodes and each has at least n_est active
// send-days before `day` in `graph`. Self-loops are never established pairs.
bool is_established_internal_pair(const std::set<NodeId>& training, const ActivityGraph& graph, NodeId v, NodeId u,
                                  Day day, int n_est);

// Phase-1 spike rule applied to the pair's own daily counts.
double pairwise_recipient_deviation(std::span<const int> pair_series, Day day);
double pairwise_recipient_deviation(const ActivityGraph& graph, NodeId v, NodeId u, Day day);

// Count-windowed ring buffer of the sender's most recent message-level
// embeddings. Only frozen provider embeddings are accepted.
class InsiderProfile {
 public:
  explicit InsiderProfile(NodeId node = 0, int dim = kEncoderDim, std::size_t capacity = kProfileWindow);

  // Throws DataError for head-derived embeddings or a dimension mismatch.
  void push(const Eigen::VectorXd& pooled, Provenance provenance);
  void push(const EmbeddingSequence& sequence) { push(sequence.pooled(), sequence.provenance); }

  NodeId node() const { return node_; }
  int dim() const { return dim_; }
  std::size_t size() const { return window_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return window_.empty(); }
  const std::deque<Eigen::VectorXd>& window() const { return window_; }
  // Mean of the window; throws DataError when empty.
  Eigen::VectorXd centroid() const;

 private:
  NodeId node_;
  int dim_;
  std::size_t capacity_;
  std::deque<Eigen::VectorXd> window_;
};

// Builds the profile from the sender's messages strictly before `day`.
InsiderProfile build_profile(const MessageStore& messages, const EmbeddingProvider& provider, NodeId node, Day day,
                             std::size_t capacity = kProfileWindow);

// Per-node binary record: "SEGPROF1", u32 node, u32 dim, u32 window length,
// window rows as f32.
void save_profile(const InsiderProfile& profile, const std::string& path);
InsiderProfile load_profile(const std::string& path);

// 1 - max(0, cos(current, centroid)). Throws DataError on an empty window or a
// head-derived current embedding, NumericError on a zero centroid.
double linguistic_drift(const Eigen::VectorXd& current, Provenance provenance, const InsiderProfile& profile);

// 0.3 d_rec + 0.4 d_ling + 0.2 i_man + 0.1 s_struct (s_struct replaced by
// 1 - s_struct when inverted). Throws DataError for inputs outside [0, 1].
InsiderScore insider_score(double d_rec, double d_ling, double i_man, double s_struct, bool invert_struct = false);

}  // namespace segraph
