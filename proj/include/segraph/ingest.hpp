#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segraph/calendar.hpp"
#include "segraph/error.hpp"

namespace segraph {

using NodeId = std::uint32_t;
using NodePair = std::pair<NodeId, NodeId>;  // (sender, receiver)

// `count` messages sent by `sender` on `day`, each addressed to every
// receiver in the list. An empty receiver list only contributes to the
// sender's daily series.
struct ActivityRecord {
  NodeId sender = 0;
  std::vector<NodeId> receivers;
  Day day = 0;
  int count = 1;
  int line = 0;  // 1-based source line, 0 when synthetic

  friend bool operator==(const ActivityRecord& a, const ActivityRecord& b) {
    return a.sender == b.sender && a.receivers == b.receivers && a.day == b.day && a.count == b.count;
  }
};

enum class RecordFormat {
  kRawEmailLog,   // header + `sender,receiver,date,count`; receiver may be `a;b;c`
  kNodeDayCount,  // header + `node,date,count`, joined with a `sender,receiver` edge list
};

struct ParseOptions {
  RecordFormat format = RecordFormat::kRawEmailLog;
  Calendar calendar{};
  std::string edge_list_path;  // required for kNodeDayCount
};

struct ParseIssue {
  int line = 0;
  std::string message;
};

class ParseError : public DataError {
 public:
  explicit ParseError(std::vector<ParseIssue> issues);
  const std::vector<ParseIssue>& issues() const { return issues_; }

 private:
  std::vector<ParseIssue> issues_;
};

// Throws DataError when the file is unreadable and ParseError (listing every
// offending line) for malformed or out-of-range records.
std::vector<ActivityRecord> parse_activity_records(const std::string& path, const ParseOptions& options = {});

void write_activity_csv(std::span<const ActivityRecord> records, const Calendar& calendar, const std::string& path);

// Sent-message counts per day; entry for day t lives at counts()[t - 1].
class DailySeries {
 public:
  explicit DailySeries(int horizon = kDefaultHorizon) : counts_(static_cast<std::size_t>(horizon), 0) {}

  int horizon() const { return static_cast<int>(counts_.size()); }
  int at(Day day) const { return counts_.at(static_cast<std::size_t>(day - 1)); }
  void add(Day day, int n) { counts_.at(static_cast<std::size_t>(day - 1)) += n; }
  std::span<const int> counts() const { return counts_; }
  long long total() const;

  friend bool operator==(const DailySeries&, const DailySeries&) = default;

 private:
  std::vector<int> counts_;
};

std::map<NodeId, DailySeries> vectorize_time_series(std::span<const ActivityRecord> records,
                                                     int horizon = kDefaultHorizon);

using DayCounts = std::map<Day, int>;

// Directed attributed multigraph. Mutable while being built; downstream
// modules only read it.
class ActivityGraph {
 public:
  explicit ActivityGraph(int horizon = kDefaultHorizon, Calendar calendar = {});

  void add_node(NodeId id);
  // Adds the record's messages to the sender's series and its edge-days.
  void add_record(const ActivityRecord& record);
  void add_emails(NodeId sender, NodeId receiver, Day day, int count);
  void add_sent(NodeId sender, Day day, int count);

  int horizon() const { return horizon_; }
  const Calendar& calendar() const { return calendar_; }
  bool has_node(NodeId id) const { return series_.contains(id); }
  std::size_t node_count() const { return series_.size(); }
  std::vector<NodeId> nodes() const;
  const DailySeries& series(NodeId id) const;
  const std::map<NodeId, DailySeries>& all_series() const { return series_; }

  const std::map<NodePair, DayCounts>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }
  const DayCounts* edge(NodeId sender, NodeId receiver) const;
  int emails(NodeId sender, NodeId receiver, Day day) const;

  // Every (sender, receiver) -> count active on `day`, sorted by pair.
  const std::map<NodePair, int>& day_edges(Day day) const;
  std::vector<NodeId> recipients(NodeId sender, Day day) const;
  // Days with at least one edge, ascending.
  std::vector<Day> active_days() const;

  long long total_sent() const;

  friend bool operator==(const ActivityGraph& a, const ActivityGraph& b) {
    return a.horizon_ == b.horizon_ && a.series_ == b.series_ && a.edges_ == b.edges_;
  }

 private:
  void check_day(Day day) const;

  int horizon_;
  Calendar calendar_;
  std::map<NodeId, DailySeries> series_;
  std::map<NodePair, DayCounts> edges_;
  std::vector<std::map<NodePair, int>> by_day_;  // index 0 unused
};

struct GraphBuild {
  ActivityGraph graph;
  std::vector<std::string> warnings;  // self-loops and similar
};

GraphBuild build_graph(std::span<const ActivityRecord> records, int horizon = kDefaultHorizon,
                       Calendar calendar = {});

// Days on which each ordered pair exchanged at least one email.
class InteractionHistory {
 public:
  explicit InteractionHistory(const ActivityGraph& graph);

  std::span<const Day> days(NodeId sender, NodeId receiver) const;
  // Number of interaction days strictly before `day`.
  int days_before(NodeId sender, NodeId receiver, Day day) const;
  int interaction_day_count(NodeId sender, NodeId receiver) const {
    return static_cast<int>(days(sender, receiver).size());
  }
  const std::map<NodePair, std::vector<Day>>& pairs() const { return days_; }

 private:
  std::map<NodePair, std::vector<Day>> days_;
};

InteractionHistory build_interaction_history(const ActivityGraph& graph);

struct TemporalSplit {
  ActivityGraph train;
  ActivityGraph test;
};

// Train keeps activity on days <= cutoff, test the rest. A node appears in a
// side only if it has activity there.
TemporalSplit temporal_split(const ActivityGraph& graph, Day cutoff);

// Versioned binary snapshot plus a JSON metadata sidecar.
void save_graph(const ActivityGraph& graph, const std::string& path);
ActivityGraph load_graph(const std::string& path);
std::string graph_metadata_json(const ActivityGraph& graph);

}  // namespace segraph
