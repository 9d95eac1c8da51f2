#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segraph/ingest.hpp"
#include "segraph/providers.hpp"

namespace segraph {

enum class CampaignPattern { kLikingGroom, kAuthorityBurst, kBroadcast, kLowSlow, kInsider };
std::string_view to_string(CampaignPattern pattern);
CampaignPattern parse_pattern(std::string_view text);

struct CampaignSpec {
  std::string id;
  NodeId attacker = 0;
  std::vector<NodeId> targets;
  Day start_day = 1;
  Day end_day = 1;
  int n_emails = 1;  // total, including target acknowledgments
  CampaignPattern pattern = CampaignPattern::kLowSlow;
  std::string principle;
  int replies = 0;     // acknowledgments sent back by targets (part of n_emails)
  int burst_size = 3;  // authority-burst: emails on the day after the opener
  int waves = 2;       // broadcast: days on which the broadcast goes out

  // Throws ConfigError on an inconsistent spec.
  void validate(int horizon = kDefaultHorizon) const;
  int attacker_emails() const { return n_emails - replies; }
  friend bool operator==(const CampaignSpec&, const CampaignSpec&) = default;
};

// The five campaigns C1..C5 on the default calendar.
std::vector<CampaignSpec> builtin_campaigns(const Calendar& calendar = {});

struct ScheduledEmail {
  NodeId sender = 0;
  NodeId receiver = 0;
  Day day = 0;
  bool reply = false;
};

// Deterministic per-pattern schedule: burst sends one opener, then
// `burst_size` emails the next day, then one per day; low-slow, liking-groom
// and insider spread attacker emails evenly over the span; broadcast sends
// round-robin over the targets in `waves` evenly spaced waves. Replies go out
// the day after the attacker email they answer.
std::vector<ScheduledEmail> schedule_campaign(const CampaignSpec& spec);

struct AttackTriple {
  std::string campaign;
  NodeId sender = 0;
  NodeId receiver = 0;
  Day day = 0;

  auto key() const { return std::tie(sender, receiver, day); }
  friend bool operator==(const AttackTriple&, const AttackTriple&) = default;
};

// Attacker-originated (sender, receiver, day) triples, deduplicated.
class GroundTruth {
 public:
  void add(const AttackTriple& triple);
  void merge(const GroundTruth& other);
  bool contains(NodeId sender, NodeId receiver, Day day) const;
  // Campaign id of a triple, if it is an attack.
  std::optional<std::string> campaign_of(NodeId sender, NodeId receiver, Day day) const;
  const std::vector<AttackTriple>& triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  std::map<std::string, int> per_campaign() const;
  // Days on which at least one attack triple occurs, ascending.
  std::vector<Day> attack_days() const;

 private:
  std::vector<AttackTriple> triples_;  // sorted by (sender, receiver, day)
};

// CSV `campaign,sender,receiver,day` (day index).
void save_ground_truth(const GroundTruth& truth, const std::string& path);
GroundTruth load_ground_truth(const std::string& path);

inline constexpr std::string_view kPlaceholderProvenance = "synthetic-placeholder";

struct Injection {
  ActivityGraph graph;
  GroundTruth truth;
  std::vector<MessageRecord> messages;  // ids start with "syn-"; text is placeholder
  std::vector<ActivityRecord> records;
  std::string text_provenance{kPlaceholderProvenance};
};

// Copy-on-inject: `graph` is not modified. Throws DataError when a target is
// missing, when an external attacker already exists or when an insider
// attacker does not.
Injection inject_campaign(const ActivityGraph& graph, const CampaignSpec& spec, std::uint64_t seed);
Injection inject_campaigns(const ActivityGraph& graph, std::span<const CampaignSpec> specs, std::uint64_t seed);

// Moves the span by delta days. Throws DataError when it leaves [1, horizon].
CampaignSpec shift_campaign(const CampaignSpec& spec, int delta_days, int horizon = kDefaultHorizon);

// Placeholder text for an attacker email (or a target acknowledgment).
MessageRecord placeholder_message(const CampaignSpec& spec, const ScheduledEmail& email, int index,
                                  std::uint64_t seed);

struct ScanConfig {
  int window = 30;
  double cap = 30.0;
};

// Email multiplicity inside the closed 1-hop neighbourhood of `node` in the
// day's graph (both endpoints inside the neighbourhood).
long long neighborhood_count(const ActivityGraph& graph, NodeId node, Day day);

// z-score of today's neighbourhood count against the previous `window` days
// (population deviation), capped at `cap`. With zero deviation the value is
// `cap` when today exceeds the mean and 0 otherwise. Throws DataError when
// day <= window or day > horizon.
double scan_statistic(const ActivityGraph& graph, NodeId node, Day day, const ScanConfig& config = {});

}  // namespace segraph
