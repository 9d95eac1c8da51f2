#include "segraph/scoring.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace segraph {

void ScoreWeights::validate() const {
  for (double w : {alpha, beta, gamma, w1, w2, w3}) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("score weights must be finite and non-negative");
  }
  if (w2 + w3 <= 0) throw ConfigError("agg.w2 + agg.w3 must be positive");
}

std::string_view to_string(Branch branch) { return branch == Branch::kInsider ? "insider" : "standard"; }

SpikeScore spike_score(std::span<const int> counts, Day day) {
  if (day < 2 || day > static_cast<Day>(counts.size())) {
    throw DataError(fmt::format("spike_score: day {} outside [2, {}]", day, counts.size()));
  }
  const auto past = counts.first(static_cast<std::size_t>(day - 1));
  double mean = 0;
  for (int c : past) mean += c;
  mean /= static_cast<double>(past.size());
  double var = 0;
  for (int c : past) var += (c - mean) * (c - mean);
  const double sigma = std::sqrt(var / static_cast<double>(past.size()));
  const double x = counts[static_cast<std::size_t>(day - 1)];
  SpikeScore out;
  if (sigma < 1e-12) {
    out.z = x > mean ? HUGE_VAL : 0.0;
    out.s1 = x > mean ? 1.0 : 0.0;
    return out;
  }
  out.z = (x - mean) / sigma;
  out.s1 = out.z > 0 ? std::erf(out.z / std::sqrt(2.0)) : 0.0;
  return out;
}

double history_ratio(const InteractionHistory& history, NodePair pair, Day day) {
  const int past = history.days_before(pair.first, pair.second, day);
  if (past == 0) return 0.0;
  const int quiet = std::max(1, (day - 1) - past);
  return static_cast<double>(past) / quiet;
}

double k_dynamic(const InteractionHistory& history, Day day) {
  std::vector<double> ratios;
  for (const auto& [pair, days] : history.pairs()) {
    if (pair.first == pair.second || days.empty() || days.front() >= day) continue;
    ratios.push_back(history_ratio(history, pair, day));
  }
  if (ratios.empty()) return 0.0;
  const auto mid = ratios.size() / 2;
  std::nth_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(mid), ratios.end());
  const double upper = ratios[mid];
  if (ratios.size() % 2 == 1) return upper;
  const double lower = *std::max_element(ratios.begin(), ratios.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

Frequency historical_frequency(const InteractionHistory& history, NodePair pair, Day day, double k) {
  if (day <= 1) throw DataError(fmt::format("historical_frequency: day {} has no past", day));
  Frequency out;
  out.h = history_ratio(history, pair, day);
  out.f = out.h > 0 ? out.h / (k + out.h) : 0.0;
  return out;
}

Frequency historical_frequency(const InteractionHistory& history, NodePair pair, Day day) {
  if (day <= 1) throw DataError(fmt::format("historical_frequency: day {} has no past", day));
  return historical_frequency(history, pair, day, k_dynamic(history, day));
}

double relational_score(double f, double sim, const ScoreWeights& weights) {
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) {
    throw ConfigError("relational_score: negative phase-2 weight");
  }
  const double s2 = weights.alpha * (1 - f) + weights.beta * (1 - sim) + weights.gamma * f * (1 - sim);
  return std::clamp(s2, 0.0, 1.0);
}

namespace {
// Nodes absent from the partition behave as singleton communities.
long long community_of(const Partition& partition, NodeId id) {
  auto it = partition.find(id);
  return it == partition.end() ? -1LL - static_cast<long long>(id) : it->second;
}
}  // namespace

Contextual contextual_score(NodeId sender, NodeId receiver, Day day, const Partition& partition,
                            const ActivityGraph& graph) {
  auto recipients = graph.recipients(sender, day);
  std::erase(recipients, sender);
  if (recipients.empty()) {
    throw DataError(fmt::format("contextual_score: node {} sent nothing on day {}", sender, day));
  }
  const auto target = community_of(partition, receiver);
  const auto same = std::count_if(recipients.begin(), recipients.end(),
                                  [&](NodeId r) { return community_of(partition, r) == target; });
  Contextual out;
  out.comm_frac = static_cast<double>(same) / static_cast<double>(recipients.size());
  out.s3 = 1.0 - out.comm_frac;
  return out;
}

double aggregate(const PhaseScores& p, const ScoreWeights& w) {
  return std::clamp((1.0 + w.w1 * p.s1) * (w.w2 * p.s2 + w.w3 * p.s3), 0.0, 1.0);
}

std::vector<ScoredInteraction> score_day(const ScoringInputs& in, Day day, const BranchRouter& router,
                                         const InsiderScorer& insider) {
  std::vector<ScoredInteraction> out;
  const auto& active = in.graph.day_edges(day);
  if (active.empty()) return out;
  if (day < 2) throw DataError("score_day: day 1 has no history to score against");

  const double k = k_dynamic(in.history, day);
  for (const auto& [pair, count] : active) {
    if (pair.first == pair.second) continue;
    ScoredInteraction si;
    si.sender = pair.first;
    si.receiver = pair.second;
    si.day = day;
    const auto spike = spike_score(in.graph.series(pair.first), day);
    si.phases.z = spike.z;
    si.phases.s1 = spike.s1;
    const auto freq = historical_frequency(in.history, pair, day, k);
    si.phases.f = freq.f;
    si.phases.sim = cosine_sim01(in.embeddings.at(pair.first), in.embeddings.at(pair.second));
    si.phases.s2 = relational_score(si.phases.f, si.phases.sim, in.weights);
    const auto ctx = contextual_score(pair.first, pair.second, day, in.partition, in.graph);
    si.phases.comm_frac = ctx.comm_frac;
    si.phases.s3 = ctx.s3;
    si.s_final = aggregate(si.phases, in.weights);
    si.branch = router ? router(si.sender, si.receiver, day) : Branch::kStandard;
    if (si.branch == Branch::kInsider && insider) si.insider = insider(si);
    out.push_back(std::move(si));
  }
  return out;
}

}  // namespace segraph
