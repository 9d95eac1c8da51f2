#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "segraph/background.hpp"
#include "segraph/campaigns.hpp"
#include "testutil.hpp"

namespace segraph {
namespace {

const std::vector<ActivityRecord>& background_records() {
  static const auto records = [] {
    BackgroundConfig c;
    c.messages = false;
    return generate_background(c).records;
  }();
  return records;
}

const ActivityGraph& background_graph() {
  static const ActivityGraph g = build_graph(background_records()).graph;
  return g;
}

const CampaignSpec& builtin(const std::string& id) {
  static const auto specs = builtin_campaigns();
  return *std::find_if(specs.begin(), specs.end(), [&](const auto& s) { return s.id == id; });
}

TEST(Specs, BuiltinShapes) {
  const auto specs = builtin_campaigns();
  ASSERT_EQ(specs.size(), 5u);
  const Calendar cal;
  EXPECT_EQ(builtin("C1").start_day, cal.day_of("1999-07-20"));
  EXPECT_EQ(builtin("C1").start_day, 201);
  EXPECT_EQ(builtin("C3").targets.size(), 5u);
  EXPECT_EQ(builtin("C5").attacker, 1023u);
  int total = 0;
  for (const auto& s : specs) {
    EXPECT_NO_THROW(s.validate());
    total += s.n_emails;
  }
  EXPECT_EQ(total, 77);
}

TEST(Specs, ValidationRejectsInconsistentSpecs) {
  auto s = builtin("C1");
  s.end_day = s.start_day - 1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = builtin("C1");
  s.replies = s.n_emails;
  EXPECT_THROW(s.validate(), ConfigError);
  s = builtin("C1");
  s.targets.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(parse_pattern("phishing"), ConfigError);
}

TEST(Schedule, EmailCountsAndWindow) {
  for (const auto& spec : builtin_campaigns()) {
    const auto emails = schedule_campaign(spec);
    EXPECT_EQ(static_cast<int>(emails.size()), spec.n_emails) << spec.id;
    int replies = 0;
    for (const auto& e : emails) {
      replies += e.reply;
      EXPECT_GE(e.day, spec.start_day) << spec.id;
      EXPECT_LE(e.day, spec.end_day + (e.reply ? 1 : 0)) << spec.id;
      EXPECT_EQ(e.reply ? e.receiver : e.sender, spec.attacker);
    }
    EXPECT_EQ(replies, spec.replies) << spec.id;
  }
}

TEST(Schedule, BroadcastRoundRobin) {
  std::map<NodeId, int> per_target;
  for (const auto& e : schedule_campaign(builtin("C3"))) ++per_target[e.receiver];
  ASSERT_EQ(per_target.size(), 5u);
  int sum = 0;
  for (auto [t, n] : per_target) {
    EXPECT_GE(n, 3) << t;
    EXPECT_LE(n, 4) << t;
    sum += n;
  }
  EXPECT_EQ(sum, 18);  // 5 * 3 + 3
}

TEST(Schedule, BurstIsFrontLoaded) {
  std::map<Day, int> per_day;
  for (const auto& e : schedule_campaign(builtin("C2"))) per_day[e.day] += !e.reply;
  const auto first = per_day.begin()->first;
  EXPECT_EQ(per_day[first], 1);
  EXPECT_EQ(per_day[first + 1], builtin("C2").burst_size);
}

TEST(Inject, AddsAttackerWithoutTouchingInput) {
  const auto& g = background_graph();
  const auto before = g;
  const auto inj = inject_campaign(g, builtin("C1"), 1);
  EXPECT_EQ(g, before);
  EXPECT_EQ(inj.graph.node_count(), g.node_count() + 1);
  EXPECT_TRUE(inj.graph.has_node(6600));
  EXPECT_EQ(inj.truth.size(), 6u);
  EXPECT_EQ(inj.text_provenance, "synthetic-placeholder");
}

TEST(Inject, RebuildingFromRawRecordsRestoresGraph) {
  const auto& records = background_records();
  const auto& g = background_graph();
  const auto inj = inject_campaigns(g, builtin_campaigns(), 4);
  std::vector<ActivityRecord> all = records;
  all.insert(all.end(), inj.records.begin(), inj.records.end());
  EXPECT_EQ(build_graph(all).graph, inj.graph);
  EXPECT_EQ(build_graph(records).graph, g);
  long long added = 0;
  for (const auto& r : inj.records) added += static_cast<long long>(r.count) * static_cast<long long>(r.receivers.size());
  EXPECT_EQ(added, 77);
}

TEST(Inject, GroundTruthCountsAndContainment) {
  const auto& g = background_graph();
  const auto inj = inject_campaigns(g, builtin_campaigns(), 1);
  EXPECT_EQ(inj.truth.size(), 57u);
  const std::map<std::string, int> expect{{"C1", 6}, {"C2", 9}, {"C3", 10}, {"C4", 8}, {"C5", 24}};
  EXPECT_EQ(inj.truth.per_campaign(), expect);
  std::set<NodeId> attackers;
  for (const auto& s : builtin_campaigns()) attackers.insert(s.attacker);
  for (const auto& t : inj.truth.triples()) {
    EXPECT_GT(inj.graph.emails(t.sender, t.receiver, t.day), 0);
    EXPECT_TRUE(attackers.contains(t.sender));
  }
  // Every attacker-sent triple in the messages is labelled.
  for (const auto& m : inj.messages) {
    if (m.label == Label::kAttack) {
      EXPECT_TRUE(inj.truth.contains(m.sender, m.receiver, m.day)) << m.id;
    }
    EXPECT_TRUE(m.id.starts_with("syn-"));
  }
}

TEST(Inject, DeterministicForSeed) {
  const auto& g = background_graph();
  const auto a = inject_campaigns(g, builtin_campaigns(), 9);
  const auto b = inject_campaigns(g, builtin_campaigns(), 9);
  EXPECT_EQ(a.graph, b.graph);
  EXPECT_EQ(a.messages, b.messages);
}

TEST(Inject, Preconditions) {
  const auto& g = background_graph();
  auto missing = builtin("C1");
  missing.targets = {99999};
  EXPECT_THROW(inject_campaign(g, missing, 1), DataError);
  auto clash = builtin("C1");
  clash.attacker = 5;  // already an employee
  EXPECT_THROW(inject_campaign(g, clash, 1), DataError);
  auto ghost = builtin("C5");
  ghost.attacker = 77777;
  EXPECT_THROW(inject_campaign(g, ghost, 1), DataError);
}

TEST(Shift, IdentityInverseAndHistogram) {
  const auto& c1 = builtin("C1");
  EXPECT_EQ(shift_campaign(c1, 0), c1);
  const auto moved = shift_campaign(c1, 731);
  EXPECT_EQ(Calendar{}.iso(moved.start_day), "2001-07-20");
  EXPECT_EQ(shift_campaign(moved, -731), c1);
  std::map<Day, int> a, b;
  for (const auto& e : schedule_campaign(c1)) ++a[e.day + 731];
  for (const auto& e : schedule_campaign(moved)) ++b[e.day];
  EXPECT_EQ(a, b);
  EXPECT_THROW(shift_campaign(c1, 2000), DataError);
  EXPECT_THROW(shift_campaign(c1, -300), DataError);
}

TEST(GroundTruthFile, RoundTrip) {
  const auto inj = inject_campaigns(background_graph(), builtin_campaigns(), 1);
  const auto path = (testing::scratch_dir("truth") / "truth.csv").string();
  save_ground_truth(inj.truth, path);
  const auto back = load_ground_truth(path);
  EXPECT_EQ(back.triples(), inj.truth.triples());
}

// Independent neighbourhood count by enumeration of the day's edge list.
double scan_oracle(const std::vector<std::tuple<NodeId, NodeId, Day, int>>& emails, NodeId node, Day day, int window) {
  auto count = [&](Day t) {
    std::set<NodeId> hood{node};
    for (auto [s, r, d, n] : emails) {
      if (d != t) continue;
      if (s == node) hood.insert(r);
      if (r == node) hood.insert(s);
    }
    double c = 0;
    for (auto [s, r, d, n] : emails) {
      if (d == t && hood.contains(s) && hood.contains(r)) c += n;
    }
    return c;
  };
  double mean = 0, var = 0;
  for (Day t = day - window; t < day; ++t) mean += count(t);
  mean /= window;
  for (Day t = day - window; t < day; ++t) var += (count(t) - mean) * (count(t) - mean);
  return (count(day) - mean) / std::sqrt(var / window);
}

TEST(Scan, HandEnumeratedMicroGraph) {
  // Node 1 talks to 2 daily, 2 and 3 chat on odd days, node 4 is outside.
  std::vector<std::tuple<NodeId, NodeId, Day, int>> emails;
  for (Day d = 1; d <= 12; ++d) {
    emails.push_back({1, 2, d, 1 + d % 3});
    if (d % 2) emails.push_back({2, 3, d, 1});
    emails.push_back({3, 4, d, 2});
  }
  emails.push_back({1, 3, 12, 2});  // on day 12, 3 joins the neighbourhood
  ActivityGraph g(12);
  for (auto [s, r, d, n] : emails) g.add_emails(s, r, d, n);
  // 1->2 carries 1, 1->3 carries 2; 2->3 is silent on even days and 4 is outside.
  EXPECT_EQ(neighborhood_count(g, 1, 12), 3);
  const ScanConfig cfg{5, 30.0};
  for (Day day = 6; day <= 12; ++day) {
    EXPECT_NEAR(scan_statistic(g, 1, day, cfg), scan_oracle(emails, 1, day, 5), 1e-12) << day;
  }
  EXPECT_THROW(scan_statistic(g, 1, 5, cfg), DataError);
}

TEST(Scan, ConstantActivityIsZeroAndFlatBurstIsCapped) {
  ActivityGraph g(40);
  for (Day d = 1; d <= 40; ++d) g.add_emails(1, 2, d, 3);
  EXPECT_EQ(scan_statistic(g, 1, 35), 0.0);
  g.add_emails(1, 5, 40, 1);
  EXPECT_EQ(scan_statistic(g, 1, 40), 30.0);
}

TEST(Scan, FrontLoadedBurstDecays) {
  const auto inj = inject_campaigns(background_graph(), std::vector<CampaignSpec>{builtin("C1"), builtin("C2")}, 1);
  for (const auto& id : {"C1", "C2"}) {
    const auto& spec = builtin(id);
    std::set<Day> days;
    for (const auto& e : schedule_campaign(spec)) {
      if (!e.reply) days.insert(e.day);
    }
    const std::vector<Day> send(days.begin(), days.end());
    ASSERT_GE(send.size(), 5u);
    const double first = scan_statistic(inj.graph, spec.attacker, send[0]);
    for (std::size_t k = 4; k < send.size(); ++k) {
      EXPECT_LT(scan_statistic(inj.graph, spec.attacker, send[k]), first) << id << " day " << k + 1;
    }
  }
}

}  // namespace
}  // namespace segraph
