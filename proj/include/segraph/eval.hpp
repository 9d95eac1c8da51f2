#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segraph/campaigns.hpp"
#include "segraph/scoring.hpp"

namespace segraph {

enum class Stage { kGnnOnly, kTwoStage, kVerifierOnly, kScanBaseline };
std::string_view to_string(Stage stage);

struct CampaignCounts {
  int attacks = 0;
  int detected = 0;
};

struct ThresholdRow {
  double tau = 0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long flagged = 0;
  long total = 0;  // interactions scored
  double recall = 0;
  double precision = 0;
  double f1 = 0;
  double filter_load = 0;
  std::map<std::string, CampaignCounts> per_campaign;
};

struct EvalReport {
  Stage stage = Stage::kGnnOnly;
  std::vector<ThresholdRow> rows;
};

// Counts a confusion matrix. Truth triples missing from `flags` count as
// false negatives.
ThresholdRow confusion(std::span<const ScoredInteraction> scores, const std::vector<bool>& flags,
                       const GroundTruth& truth, double tau);

inline const std::vector<double> kDefaultTaus{0.65, 0.70, 0.75, 0.80};

// Flags an interaction iff its branch score >= tau. When `insider_tau` is set,
// insider-branch interactions use it instead of the swept tau. Throws
// DataError on empty truth.
EvalReport sweep_thresholds(std::span<const ScoredInteraction> scores, const GroundTruth& truth,
                            std::span<const double> taus = kDefaultTaus,
                            std::optional<double> insider_tau = std::nullopt);

struct PhaseSubset {
  bool s1 = true;
  bool s2 = true;
  bool s3 = true;

  int size() const { return int(s1) + int(s2) + int(s3); }
  std::string label() const;  // "1+2" style
  friend bool operator==(const PhaseSubset&, const PhaseSubset&) = default;
};

// The seven non-empty subsets, singles first.
std::vector<PhaseSubset> all_phase_subsets();
// Parses "1,2,3" or "1+3"; throws ConfigError on an empty or bad list.
PhaseSubset parse_phase_subset(std::string_view text);

// Standard-branch score with excluded phases forced to zero. A single active
// phase is scored additively on its own (the multiplicative form would zero a
// volume-only score); larger subsets use the regular aggregate.
double ablated_score(const PhaseScores& phases, const ScoreWeights& weights, const PhaseSubset& subset);

struct AblationRow {
  PhaseSubset subset;
  ThresholdRow metrics;
};

// Insider-branch interactions keep their insider score in every row. Throws
// ConfigError for an empty subset.
std::vector<AblationRow> ablation(std::span<const ScoredInteraction> scores, const GroundTruth& truth,
                                  const ScoreWeights& weights, std::span<const PhaseSubset> subsets, double tau,
                                  std::optional<double> insider_tau = std::nullopt);

struct Verdict {
  NodeId sender = 0;
  NodeId receiver = 0;
  Day day = 0;
  double p = 0;
  bool flag = false;
};

struct TwoStageReport {
  ThresholdRow structural;       // stage 1 at tau
  ThresholdRow verified;         // stage 2; recall over all attacks
  double recall_of_candidates = 0;  // stage-2 TP over stage-1 TP
  long verifier_calls = 0;
  double input_reduction = 0;    // share of interactions sent to the verifier
};

// Stage 2 keeps a structurally flagged interaction iff its verdict flags it;
// interactions without a verdict are dropped.
TwoStageReport two_stage_eval(std::span<const ScoredInteraction> scores, std::span<const Verdict> verdicts,
                              const GroundTruth& truth, double tau, std::optional<double> insider_tau = std::nullopt);

// Verifier applied to every interaction (no structural filter), flag p >= 0.5.
EvalReport verifier_only_baseline(std::span<const ScoredInteraction> scores, std::span<const Verdict> verdicts,
                                  const GroundTruth& truth);

// Structural flags at tau (insider rows at insider_tau when set).
std::vector<bool> structural_flags(std::span<const ScoredInteraction> scores, double tau,
                                   std::optional<double> insider_tau = std::nullopt);

// CSV `stage,tau,tp,fp,fn,flagged,total,recall,precision,f1,filter_load`.
void write_report_csv(const std::vector<EvalReport>& reports, const std::string& path);
// CSV `stage,tau,campaign,attacks,detected`.
void write_campaign_csv(const std::vector<EvalReport>& reports, const std::string& path);
// Human-readable table.
std::string format_report(const EvalReport& report);

}  // namespace segraph
