#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "segraph/background.hpp"
#include "segraph/campaigns.hpp"
#include "segraph/eval.hpp"
#include "segraph/gnn.hpp"
#include "segraph/insider.hpp"
#include "segraph/providers.hpp"
#include "segraph/scoring.hpp"
#include "segraph/verifier.hpp"

namespace segraph {

struct VerifierRunConfig {
  static TrainConfig default_train() {
    TrainConfig t;
    t.epochs = 10;
    t.lr = 0.01;
    return t;
  }

  TrainConfig train = default_train();
  std::vector<std::uint64_t> corpus_seeds{1001, 1002};  // injections whose text trains the head
  int negatives = 200;            // legit messages sampled from the background
  int broadcast_negatives = 40;   // extra negatives from one-to-many sender-days
  int broadcast_fanout = 10;      // recipients on a day that make a sender-day a broadcast
  int summary_budget = 40;        // words in the history summary
};

// Flat dotted key=value configuration. Every key has a default; unknown keys
// are rejected.
struct RunConfig {
  std::string activity;       // activity CSV; empty selects the synthetic background
  RecordFormat format = RecordFormat::kRawEmailLog;
  std::string edges;          // edge list for the node-day-count layout
  std::string messages;       // message CSV for the activity file (optional)
  std::string embeddings;     // embedding file; empty selects the stub provider
  std::string out_dir = "segraph-out";
  std::uint64_t seed = 1;     // injection seed
  std::uint64_t stub_seed = 0;

  BackgroundConfig background;
  FeatureProjection projection;
  SageHyper gnn;
  ScoreWeights weights;
  InsiderConfig insider;
  VerifierRunConfig verifier;

  double tau = 0.70;
  std::vector<double> taus = kDefaultTaus;
  std::vector<PhaseSubset> phases = all_phase_subsets();
  Day cutoff = 731;
  int shift = 731;
  double temporal_tau = 0.60;
  ScanConfig scan;
  std::vector<CampaignSpec> campaigns = builtin_campaigns();

  // Applies one key; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  // Throws ConfigError when the combination is inconsistent.
  void validate() const;
  // Every key with its current value, one `key = value` per line.
  std::string dump() const;

  std::string path(const std::string& name) const;
};

// `#` starts a comment; blank lines are skipped. Errors name the line.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");

// Background traffic plus its messages.
struct Dataset {
  ActivityGraph graph;
  MessageStore messages;
};

Dataset load_dataset(const RunConfig& config);

std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& config);

// Memoises pooled vectors by request key, falling back to the text.
class CachingProvider final : public EmbeddingProvider {
 public:
  explicit CachingProvider(const EmbeddingProvider& inner) : inner_(inner) {}
  EmbeddingSequence embed(const ContentRequest& request) const override { return inner_.embed(request); }
  Eigen::VectorXd pooled(const ContentRequest& request) const override;
  int dim() const override { return inner_.dim(); }

 private:
  const EmbeddingProvider& inner_;
  mutable std::map<std::string, Eigen::VectorXd> cache_;
};

struct ScoreContext {
  const ActivityGraph& training_graph;  // decides which nodes are internal
  const ActivityGraph& graph;           // augmented graph being scored
  const MessageStore& messages;
  const EmbeddingProvider& provider;
};

// Scores every interaction on `days`. Insider-branch rows get d_rec, d_ling and
// s_struct with a provisional i_man of 0; the verifier supplies the real value.
std::vector<ScoredInteraction> score_interactions(const RunConfig& config, const SageModel& model,
                                                  const ScoreContext& context, std::span<const Day> days);

// Replaces i_man with the verdict probability and recomputes s_insider.
void apply_manipulation(ScoredInteraction& row, double i_man, bool invert_struct);

// Labelled (history summary, message) pairs for the head. Positives are the
// attacker emails of the campaigns injected with the corpus seeds; negatives
// are their target replies plus sampled background messages.
struct CorpusItem {
  std::string summary;
  MessageRecord message;
  int label = 0;
};

std::vector<CorpusItem> build_verifier_corpus(const RunConfig& config, const Dataset& data);
std::vector<VerifierSample> embed_corpus(std::span<const CorpusItem> corpus, const EmbeddingProvider& provider);

// History summary of the pair strictly before `day`, both directions.
std::string history_summary(const MessageStore& messages, NodeId sender, NodeId receiver, Day day, int budget);

// kNone gives the head the no-prior-contact sentinel instead of the pair's
// history, as a verifier running without the structural stage would see it.
enum class PairContext { kHistory, kNone };

// One verdict per row: the highest probability over the pair's messages that
// day. Rows without a message are skipped.
std::vector<Verdict> verify_interactions(const RunConfig& config, std::span<const ScoredInteraction> rows,
                                         const MessageStore& messages, const EmbeddingProvider& provider,
                                         const VerifierParams& params, PairContext context = PairContext::kHistory);

struct Detection {
  Injection injection;
  MessageStore messages;  // background plus injected
  std::vector<ScoredInteraction> scores;
};

// Injects the configured campaigns into `data` and scores every attack day.
Detection detect(const RunConfig& config, const Dataset& data, const SageModel& model,
                 const EmbeddingProvider& provider);

struct TemporalArm {
  std::string label;
  int shift = 0;
  std::size_t attacks = 0;
  std::vector<ThresholdRow> rows;  // one per evaluated tau
};

struct TemporalResult {
  std::vector<TemporalArm> arms;  // unshifted, then shifted
  std::uint64_t checksum_before = 0;
  std::uint64_t checksum_after = 0;
  std::size_t train_nodes = 0;
};

// Trains on activity up to the cutoff, then scores the campaigns at their
// original dates and moved by the shift with the same frozen model.
TemporalResult temporal_experiment(const RunConfig& config, const Dataset& data, const EmbeddingProvider& provider,
                                   std::span<const double> taus);

struct ScanRow {
  std::string campaign;
  NodeId node = 0;
  Day day = 0;
  int attack_day = 0;  // 1-based rank among the attacker's sending days; 0 off-campaign
  double psi = 0;
};

// Psi at each campaign's attacker on every day it sends, plus the day after
// its peak.
std::vector<ScanRow> scan_baseline(const ActivityGraph& graph, std::span<const CampaignSpec> specs,
                                   const ScanConfig& scan);

void write_scores_csv(std::span<const ScoredInteraction> rows, const std::string& path);
std::vector<ScoredInteraction> read_scores_csv(const std::string& path);
void write_verdicts_csv(std::span<const Verdict> verdicts, const std::string& path);
std::vector<Verdict> read_verdicts_csv(const std::string& path);
void write_scan_csv(std::span<const ScanRow> rows, const std::string& path);

}  // namespace segraph
