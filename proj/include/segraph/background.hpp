#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "segraph/ingest.hpp"
#include "segraph/providers.hpp"

namespace segraph {

// Stationary synthetic organisation used for calibration and fixtures.
struct BackgroundConfig {
  std::uint64_t seed = 1;
  int horizon = kDefaultHorizon;
  int departments = 10;
  int admins = 3;           // occasional organisation-wide announcements
  int peripheral = 25;      // rare senders
  double novel_contact = 0.005;  // chance an email goes to a random colleague
  double activity_min = 0.3;    // per-user weekday send probability range
  double activity_max = 0.7;
  bool messages = true;     // also generate message text

  void validate() const;
};

enum class Role { kRegular, kAdmin, kPeripheral };

struct Background {
  std::vector<ActivityRecord> records;
  MessageStore messages;
  std::map<NodeId, int> department;
  std::map<NodeId, Role> role;
};

// Node ids 0..296 plus 817, 1017 and 1023 (the campaign targets and the
// insider). Deterministic for a given config.
std::vector<NodeId> background_ids();
Background generate_background(const BackgroundConfig& config);

}  // namespace segraph
