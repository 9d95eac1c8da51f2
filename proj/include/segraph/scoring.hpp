#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segraph/communities.hpp"
#include "segraph/gnn.hpp"
#include "segraph/ingest.hpp"

namespace segraph {

struct PhaseScores {
  double s1 = 0;         // volume anomaly
  double s2 = 0;         // relational anomaly
  double s3 = 0;         // contextual anomaly
  double z = 0;          // raw sender z-score
  double f = 0;          // normalised historical frequency
  double sim = 0;        // clamped embedding cosine
  double comm_frac = 0;  // share of same-day recipients in the receiver's community
};

// Phase-2 mix (alpha, beta, gamma) and aggregation weights (w1, w2, w3).
struct ScoreWeights {
  double alpha = 0.4;
  double beta = 0.3;
  double gamma = 0.3;
  double w1 = 0.5;
  double w2 = 1.0 / 3.0;
  double w3 = 1.0 / 3.0;

  // Throws ConfigError on negative weights or w2 + w3 == 0.
  void validate() const;
};

enum class Branch { kStandard, kInsider };
std::string_view to_string(Branch branch);

struct InsiderScore {
  double d_rec = 0;
  double d_ling = 0;
  double i_man = 0;
  double s_struct = 0;
  double s_insider = 0;
};

struct ScoredInteraction {
  NodeId sender = 0;
  NodeId receiver = 0;
  Day day = 0;
  PhaseScores phases;
  double s_final = 0;
  Branch branch = Branch::kStandard;
  std::optional<InsiderScore> insider;  // present on the insider branch

  // The score this interaction's branch is thresholded on.
  double branch_score() const { return insider ? insider->s_insider : s_final; }
};

struct SpikeScore {
  double z = 0;
  double s1 = 0;
};

// z-score of counts[day] against days 1..day-1 (population deviation),
// mapped through erf(z / sqrt 2) and floored at zero. With zero deviation the
// score is 1 when the day exceeds the mean and 0 otherwise. Throws DataError
// when day is outside [2, counts.size()].
SpikeScore spike_score(std::span<const int> counts, Day day);
inline SpikeScore spike_score(const DailySeries& series, Day day) { return spike_score(series.counts(), day); }

struct Frequency {
  double h = 0;
  double f = 0;
};

// Interaction days over non-interaction days in 1..day-1; 0 for pairs that
// never interacted. The non-interaction denominator is floored at one day.
double history_ratio(const InteractionHistory& history, NodePair pair, Day day);
// Median history ratio over all non-loop pairs with at least one past
// interaction; 0 when there are none.
double k_dynamic(const InteractionHistory& history, Day day);
Frequency historical_frequency(const InteractionHistory& history, NodePair pair, Day day, double k);
Frequency historical_frequency(const InteractionHistory& history, NodePair pair, Day day);

double relational_score(double f, double sim, const ScoreWeights& weights);

struct Contextual {
  double comm_frac = 0;
  double s3 = 0;
};

// Throws DataError when the sender has no (non-loop) recipients on `day`.
Contextual contextual_score(NodeId sender, NodeId receiver, Day day, const Partition& partition,
                            const ActivityGraph& graph);

// (1 + w1 s1)(w2 s2 + w3 s3), clamped to [0, 1].
double aggregate(const PhaseScores& phases, const ScoreWeights& weights);

// Immutable inputs for one scoring pass.
struct ScoringInputs {
  const ActivityGraph& graph;
  const EmbeddingTable& embeddings;
  const InteractionHistory& history;
  const Partition& partition;
  ScoreWeights weights;
};

// Branch routing and insider scoring are injected so this module does not
// depend on the insider branch.
using BranchRouter = std::function<Branch(NodeId sender, NodeId receiver, Day day)>;
using InsiderScorer = std::function<InsiderScore(const ScoredInteraction& standard)>;

// One ScoredInteraction per distinct active non-loop (sender, receiver) pair
// on `day`, ordered by pair.
std::vector<ScoredInteraction> score_day(const ScoringInputs& inputs, Day day, const BranchRouter& router = {},
                                         const InsiderScorer& insider = {});

}  // namespace segraph
