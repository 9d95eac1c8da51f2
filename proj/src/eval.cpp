#include "segraph/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

namespace segraph {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kGnnOnly: return "gnn-only";
    case Stage::kTwoStage: return "two-stage";
    case Stage::kVerifierOnly: return "verifier-only";
    case Stage::kScanBaseline: return "scan-baseline";
  }
  return "?";
}

namespace {

double ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

void finish(ThresholdRow& row, long truth_size) {
  row.fn = truth_size - row.tp;
  row.recall = ratio(row.tp, truth_size);
  row.precision = ratio(row.tp, row.tp + row.fp);
  row.f1 = row.recall + row.precision > 0 ? 2 * row.recall * row.precision / (row.recall + row.precision) : 0.0;
  row.filter_load = ratio(row.flagged, row.total);
}

}  // namespace

ThresholdRow confusion(std::span<const ScoredInteraction> scores, const std::vector<bool>& flags,
                       const GroundTruth& truth, double tau) {
  if (flags.size() != scores.size()) throw DataError("flag and score lists differ in length");
  ThresholdRow row;
  row.tau = tau;
  row.total = static_cast<long>(scores.size());
  for (const auto& [campaign, n] : truth.per_campaign()) row.per_campaign[campaign].attacks = n;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!flags[i]) continue;
    const auto& s = scores[i];
    ++row.flagged;
    if (const auto c = truth.campaign_of(s.sender, s.receiver, s.day)) {
      ++row.tp;
      ++row.per_campaign[*c].detected;
    } else {
      ++row.fp;
    }
  }
  finish(row, static_cast<long>(truth.size()));
  return row;
}

std::vector<bool> structural_flags(std::span<const ScoredInteraction> scores, double tau,
                                   std::optional<double> insider_tau) {
  std::vector<bool> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const double t = s.branch == Branch::kInsider && insider_tau ? *insider_tau : tau;
    out[i] = s.branch_score() >= t;
  }
  return out;
}

namespace {

ThresholdRow flag_and_count(std::span<const ScoredInteraction> scores, const GroundTruth& truth, double tau,
                            std::optional<double> insider_tau) {
  return confusion(scores, structural_flags(scores, tau, insider_tau), truth, tau);
}

}  // namespace

EvalReport sweep_thresholds(std::span<const ScoredInteraction> scores, const GroundTruth& truth,
                            std::span<const double> taus, std::optional<double> insider_tau) {
  if (truth.empty()) throw DataError("threshold sweep needs a non-empty ground truth");
  EvalReport report;
  report.stage = Stage::kGnnOnly;
  for (double tau : taus) report.rows.push_back(flag_and_count(scores, truth, tau, insider_tau));
  return report;
}

std::string PhaseSubset::label() const {
  std::string out;
  for (auto [on, name] : {std::pair{s1, "1"}, std::pair{s2, "2"}, std::pair{s3, "3"}}) {
    if (!on) continue;
    if (!out.empty()) out += '+';
    out += name;
  }
  return out;
}

std::vector<PhaseSubset> all_phase_subsets() {
  return {{true, false, false}, {false, true, false}, {false, false, true}, {true, true, false},
          {true, false, true},  {false, true, true},  {true, true, true}};
}

PhaseSubset parse_phase_subset(std::string_view text) {
  PhaseSubset out{false, false, false};
  for (char c : text) {
    switch (c) {
      case '1': out.s1 = true; break;
      case '2': out.s2 = true; break;
      case '3': out.s3 = true; break;
      case ',': case '+': case ' ': break;
      default: throw ConfigError(fmt::format("bad phase list '{}'", text));
    }
  }
  if (out.size() == 0) throw ConfigError("phase subset is empty");
  return out;
}

double ablated_score(const PhaseScores& phases, const ScoreWeights& weights, const PhaseSubset& subset) {
  if (subset.size() == 0) throw ConfigError("phase subset is empty");
  if (subset.size() == 1) return subset.s1 ? phases.s1 : subset.s2 ? phases.s2 : phases.s3;
  PhaseScores masked = phases;
  if (!subset.s1) masked.s1 = 0;
  if (!subset.s2) masked.s2 = 0;
  if (!subset.s3) masked.s3 = 0;
  return aggregate(masked, weights);
}

std::vector<AblationRow> ablation(std::span<const ScoredInteraction> scores, const GroundTruth& truth,
                                  const ScoreWeights& weights, std::span<const PhaseSubset> subsets, double tau,
                                  std::optional<double> insider_tau) {
  if (truth.empty()) throw DataError("ablation needs a non-empty ground truth");
  std::vector<AblationRow> out;
  std::vector<ScoredInteraction> masked(scores.begin(), scores.end());
  for (const auto& subset : subsets) {
    for (std::size_t i = 0; i < masked.size(); ++i) masked[i].s_final = ablated_score(scores[i].phases, weights, subset);
    out.push_back({subset, flag_and_count(masked, truth, tau, insider_tau)});
  }
  return out;
}

TwoStageReport two_stage_eval(std::span<const ScoredInteraction> scores, std::span<const Verdict> verdicts,
                              const GroundTruth& truth, double tau, std::optional<double> insider_tau) {
  if (truth.empty()) throw DataError("two-stage evaluation needs a non-empty ground truth");
  std::set<std::tuple<Day, NodeId, NodeId>> kept;
  for (const auto& v : verdicts) {
    if (v.flag) kept.emplace(v.day, v.sender, v.receiver);
  }
  const auto stage1 = structural_flags(scores, tau, insider_tau);
  std::vector<bool> stage2(scores.size(), false);
  std::set<std::tuple<Day, NodeId, NodeId>> verdict_keys;
  for (const auto& v : verdicts) verdict_keys.emplace(v.day, v.sender, v.receiver);
  TwoStageReport r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!stage1[i]) continue;
    const auto key = std::tuple{scores[i].day, scores[i].sender, scores[i].receiver};
    if (verdict_keys.contains(key)) ++r.verifier_calls;
    stage2[i] = kept.contains(key);
  }
  r.structural = confusion(scores, stage1, truth, tau);
  r.verified = confusion(scores, stage2, truth, tau);
  r.recall_of_candidates = ratio(r.verified.tp, r.structural.tp);
  r.input_reduction = r.structural.filter_load;
  return r;
}

EvalReport verifier_only_baseline(std::span<const ScoredInteraction> scores, std::span<const Verdict> verdicts,
                                  const GroundTruth& truth) {
  if (truth.empty()) throw DataError("baseline needs a non-empty ground truth");
  std::set<std::tuple<Day, NodeId, NodeId>> kept;
  for (const auto& v : verdicts) {
    if (v.flag) kept.emplace(v.day, v.sender, v.receiver);
  }
  std::vector<bool> flags(scores.size(), false);
  for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = kept.contains({scores[i].day, scores[i].sender, scores[i].receiver});
  EvalReport report;
  report.stage = Stage::kVerifierOnly;
  report.rows.push_back(confusion(scores, flags, truth, 0.5));
  return report;
}

void write_report_csv(const std::vector<EvalReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write {}", path));
  out << "stage,tau,tp,fp,fn,flagged,total,recall,precision,f1,filter_load\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      out << fmt::format("{},{:.4f},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", to_string(rep.stage), r.tau, r.tp,
                         r.fp, r.fn, r.flagged, r.total, r.recall, r.precision, r.f1, r.filter_load);
    }
  }
}

void write_campaign_csv(const std::vector<EvalReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write {}", path));
  out << "stage,tau,campaign,attacks,detected\n";
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      for (const auto& [c, n] : r.per_campaign) {
        out << fmt::format("{},{:.4f},{},{},{}\n", to_string(rep.stage), r.tau, c, n.attacks, n.detected);
      }
    }
  }
}

std::string format_report(const EvalReport& report) {
  std::string out = fmt::format("[{}]\n{:>6} {:>5} {:>6} {:>7} {:>9} {:>6} {:>11}\n", to_string(report.stage), "tau",
                                "TP", "FP", "recall", "precision", "F1", "filter_load");
  for (const auto& r : report.rows) {
    out += fmt::format("{:>6.2f} {:>5} {:>6} {:>6.1f}% {:>8.1f}% {:>6.3f} {:>10.1f}%\n", r.tau, r.tp, r.fp,
                       100 * r.recall, 100 * r.precision, r.f1, 100 * r.filter_load);
  }
  return out;
}

}  // namespace segraph
