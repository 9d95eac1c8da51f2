#include "segraph/campaigns.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "segraph/binary_io.hpp"
#include "segraph/csv.hpp"

namespace segraph {

std::string_view to_string(CampaignPattern pattern) {
  switch (pattern) {
    case CampaignPattern::kLikingGroom:
      return "liking-groom";
    case CampaignPattern::kAuthorityBurst:
      return "authority-burst";
    case CampaignPattern::kBroadcast:
      return "broadcast";
    case CampaignPattern::kLowSlow:
      return "low-slow";
    case CampaignPattern::kInsider:
      return "insider";
  }
  return "?";
}

CampaignPattern parse_pattern(std::string_view text) {
  for (auto p : {CampaignPattern::kLikingGroom, CampaignPattern::kAuthorityBurst, CampaignPattern::kBroadcast,
                 CampaignPattern::kLowSlow, CampaignPattern::kInsider}) {
    if (to_string(p) == text) return p;
  }
  throw ConfigError(fmt::format("unknown campaign pattern '{}'", text));
}

void CampaignSpec::validate(int horizon) const {
  if (id.empty()) throw ConfigError("campaign needs an id");
  if (targets.empty()) throw ConfigError(fmt::format("campaign {} has no targets", id));
  if (start_day < 1 || end_day > horizon || start_day > end_day) {
    throw ConfigError(fmt::format("campaign {} span [{}, {}] is not inside [1, {}]", id, start_day, end_day, horizon));
  }
  if (n_emails < 1 || replies < 0 || replies >= n_emails) {
    throw ConfigError(fmt::format("campaign {} needs 1 <= attacker emails (n_emails {} - replies {})", id, n_emails,
                                  replies));
  }
  if (std::find(targets.begin(), targets.end(), attacker) != targets.end()) {
    throw ConfigError(fmt::format("campaign {} targets its own attacker", id));
  }
  const int span = end_day - start_day + 1;
  const int a = attacker_emails();
  if (replies > a) throw ConfigError(fmt::format("campaign {} has more replies than attacker emails", id));
  if (pattern == CampaignPattern::kAuthorityBurst && (burst_size < 1 || span < 2)) {
    throw ConfigError(fmt::format("campaign {} burst needs burst_size >= 1 and a span of 2+ days", id));
  }
  if (pattern == CampaignPattern::kBroadcast && (waves < 1 || waves > span)) {
    throw ConfigError(fmt::format("campaign {} needs 1 <= waves <= span", id));
  }
}

std::vector<CampaignSpec> builtin_campaigns(const Calendar& cal) {
  const auto day = [&](const char* iso) { return cal.day_of(std::string_view(iso)); };
  std::vector<CampaignSpec> out;
  CampaignSpec c1{.id = "C1", .attacker = 6600, .targets = {97}, .start_day = day("1999-07-20"),
                  .end_day = day("1999-07-31"), .n_emails = 11, .pattern = CampaignPattern::kLikingGroom,
                  .principle = "liking", .replies = 5};
  CampaignSpec c2{.id = "C2", .attacker = 6601, .targets = {171}, .start_day = day("1999-08-04"),
                  .end_day = day("1999-08-15"), .n_emails = 11, .pattern = CampaignPattern::kAuthorityBurst,
                  .principle = "authority-urgency", .replies = 0, .burst_size = 3};
  CampaignSpec c3{.id = "C3", .attacker = 6602, .targets = {221, 223, 225, 226, 227}, .start_day = day("1999-10-28"),
                  .end_day = day("1999-11-02"), .n_emails = 18, .pattern = CampaignPattern::kBroadcast,
                  .principle = "authority-urgency", .replies = 0, .waves = 2};
  CampaignSpec c4{.id = "C4", .attacker = 6603, .targets = {817, 1017}, .start_day = day("1999-02-20"),
                  .end_day = day("2000-02-15"), .n_emails = 13, .pattern = CampaignPattern::kLowSlow,
                  .principle = "consistency", .replies = 5};
  CampaignSpec c5{.id = "C5", .attacker = 1023, .targets = {145}, .start_day = day("2000-04-03"),
                  .end_day = day("2000-09-18"), .n_emails = 24, .pattern = CampaignPattern::kInsider,
                  .principle = "insider", .replies = 0};
  return {c1, c2, c3, c4, c5};
}

namespace {

// Evenly spaced offsets 0..span-1 for `n` events, rounded, strictly
// increasing while n <= span.
std::vector<int> even_offsets(int n, int span) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    const int off = n == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(i) * (span - 1) / (n - 1)));
    out.push_back(n <= span ? off : i * span / n);
  }
  return out;
}

}  // namespace

std::vector<ScheduledEmail> schedule_campaign(const CampaignSpec& spec) {
  spec.validate(std::max(spec.end_day, kDefaultHorizon));
  const int span = spec.end_day - spec.start_day + 1;
  const int a = spec.attacker_emails();
  const auto& targets = spec.targets;
  std::vector<ScheduledEmail> out;
  std::vector<int> offsets;

  switch (spec.pattern) {
    case CampaignPattern::kAuthorityBurst: {
      offsets.push_back(0);
      const int burst = std::min(spec.burst_size, a - 1);
      for (int i = 0; i < burst; ++i) offsets.push_back(1);
      const int rest = a - 1 - burst;
      // One per day after the burst, wrapping when the span is too short.
      const int free_days = std::max(1, span - 2);
      for (int i = 0; i < rest; ++i) offsets.push_back(std::min(2 + i % free_days, span - 1));
      break;
    }
    case CampaignPattern::kBroadcast: {
      const auto wave_off = even_offsets(spec.waves, span);
      for (int i = 0; i < a; ++i) offsets.push_back(wave_off[static_cast<std::size_t>(i * spec.waves / a)]);
      break;
    }
    case CampaignPattern::kLikingGroom:
    case CampaignPattern::kLowSlow:
    case CampaignPattern::kInsider:
      offsets = even_offsets(a, span);
      break;
  }
  std::sort(offsets.begin(), offsets.end());
  for (int i = 0; i < a; ++i) {
    out.push_back({spec.attacker, targets[static_cast<std::size_t>(i) % targets.size()],
                   spec.start_day + offsets[static_cast<std::size_t>(i)], false});
  }
  // Replies answer attacker emails floor(j * a / r), one day later when that
  // stays inside the span.
  for (int j = 0; j < spec.replies; ++j) {
    const auto& orig = out[static_cast<std::size_t>(j * a / spec.replies)];
    const Day d = std::min(orig.day + 1, spec.end_day);
    out.push_back({orig.receiver, spec.attacker, d, true});
  }
  std::stable_sort(out.begin(), out.end(), [](const ScheduledEmail& x, const ScheduledEmail& y) { return x.day < y.day; });
  return out;
}

void GroundTruth::add(const AttackTriple& t) {
  auto it = std::lower_bound(triples_.begin(), triples_.end(), t,
                             [](const AttackTriple& a, const AttackTriple& b) { return a.key() < b.key(); });
  if (it != triples_.end() && it->key() == t.key()) return;
  triples_.insert(it, t);
}

void GroundTruth::merge(const GroundTruth& other) {
  for (const auto& t : other.triples_) add(t);
}

bool GroundTruth::contains(NodeId s, NodeId r, Day d) const { return campaign_of(s, r, d).has_value(); }

std::optional<std::string> GroundTruth::campaign_of(NodeId s, NodeId r, Day d) const {
  const AttackTriple probe{"", s, r, d};
  auto it = std::lower_bound(triples_.begin(), triples_.end(), probe,
                             [](const AttackTriple& a, const AttackTriple& b) { return a.key() < b.key(); });
  if (it != triples_.end() && it->key() == probe.key()) return it->campaign;
  return std::nullopt;
}

std::map<std::string, int> GroundTruth::per_campaign() const {
  std::map<std::string, int> out;
  for (const auto& t : triples_) ++out[t.campaign];
  return out;
}

std::vector<Day> GroundTruth::attack_days() const {
  std::set<Day> days;
  for (const auto& t : triples_) days.insert(t.day);
  return {days.begin(), days.end()};
}

void save_ground_truth(const GroundTruth& truth, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << "campaign,sender,receiver,day\n";
  for (const auto& t : truth.triples()) out << t.campaign << ',' << t.sender << ',' << t.receiver << ',' << t.day << '\n';
}

GroundTruth load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read ground truth '{}'", path));
  GroundTruth truth;
  std::vector<std::string> f;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.starts_with("campaign"))) continue;
    if (!csv::split_line(line, f) || f.size() != 4) throw DataError(fmt::format("{}:{}: expected 4 fields", path, line_no));
    try {
      truth.add({f[0], static_cast<NodeId>(std::stoul(f[1])), static_cast<NodeId>(std::stoul(f[2])), std::stoi(f[3])});
    } catch (const std::logic_error&) {
      throw DataError(fmt::format("{}:{}: bad number", path, line_no));
    }
  }
  return truth;
}

namespace {

// Schematic sentences keyed by compliance principle. They only need to be
// lexically distinct from routine mail; they are not realistic lures.
const std::map<std::string, std::vector<std::string>>& attack_sentences() {
  static const std::map<std::string, std::vector<std::string>> kSentences{
      {"liking",
       {"great to reconnect after the alumni mixer", "we share the same passion for sailing and photography",
        "as a fellow fan i thought you would enjoy this", "could you take a quick look at my personal project link",
        "i would really value your friendly opinion", "loved your talk and wanted to say hello"}},
      {"authority-urgency",
       {"executive office request approve the attached invoice immediately",
        "the chairman needs this wire transfer completed before close of business",
        "urgent do not discuss this confidential payment with anyone",
        "failure to act today will escalate to senior management", "process the vendor remittance right now",
        "notice your vehicle registration citation requires payment at the portal",
        "visit the portal and settle the outstanding fine within hours"}},
      {"consistency",
       {"following up on the commitment you made earlier", "as you agreed last time please confirm your account details",
        "you already started the verification so please complete the next step",
        "thanks for helping before one more small favour", "continue the process we discussed and reply with the code"}},
      {"insider",
       {"forward me the updated credentials for the shared drive",
        "quietly send the confidential contract draft to my personal address",
        "please change the payment account on file to the new one i attach",
        "keep this between us and export the customer list", "reset the access token and send it back to me"}}};
  return kSentences;
}

const std::vector<std::string>& reply_sentences() {
  static const std::vector<std::string> kReplies{"thanks got it", "sure will take a look", "ok noted",
                                                 "thanks for reaching out", "sounds good talk soon"};
  return kReplies;
}

}  // namespace

MessageRecord placeholder_message(const CampaignSpec& spec, const ScheduledEmail& email, int index,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(fnv1a(fmt::format("{}:{}:{}", seed, spec.id, index)));
  MessageRecord m;
  m.id = fmt::format("syn-{}-{:03}", spec.id, index);
  m.sender = email.sender;
  m.receiver = email.receiver;
  m.day = email.day;
  if (email.reply) {
    const auto& r = reply_sentences();
    m.subject = "re: hello";
    m.body = r[rng() % r.size()];
    m.label = Label::kLegit;
    return m;
  }
  const auto it = attack_sentences().find(spec.principle);
  const auto& pool = it != attack_sentences().end() ? it->second : attack_sentences().at("authority-urgency");
  std::vector<std::size_t> pick(pool.size());
  std::iota(pick.begin(), pick.end(), 0);
  for (std::size_t i = pick.size(); i > 1; --i) std::swap(pick[i - 1], pick[rng() % i]);
  m.subject = pool[pick[0]].substr(0, pool[pick[0]].find(' ', 20));
  m.body = pool[pick[1]] + ". " + pool[pick[2 % pick.size()]] + ".";
  m.label = Label::kAttack;
  return m;
}

Injection inject_campaign(const ActivityGraph& graph, const CampaignSpec& spec, std::uint64_t seed) {
  spec.validate(graph.horizon());
  for (auto t : spec.targets) {
    if (!graph.has_node(t)) throw DataError(fmt::format("campaign {} target {} is not in the graph", spec.id, t));
  }
  const bool insider = spec.pattern == CampaignPattern::kInsider;
  if (insider && !graph.has_node(spec.attacker)) {
    throw DataError(fmt::format("campaign {} insider attacker {} is not in the graph", spec.id, spec.attacker));
  }
  if (!insider && graph.has_node(spec.attacker)) {
    throw DataError(fmt::format("campaign {} external attacker {} already exists", spec.id, spec.attacker));
  }
  Injection inj{graph, {}, {}, {}};
  inj.graph.add_node(spec.attacker);
  const auto schedule = schedule_campaign(spec);
  int index = 0;
  for (const auto& e : schedule) {
    ActivityRecord rec{e.sender, {e.receiver}, e.day, 1, 0};
    inj.graph.add_record(rec);
    inj.records.push_back(std::move(rec));
    inj.messages.push_back(placeholder_message(spec, e, index++, seed));
    if (!e.reply) inj.truth.add({spec.id, e.sender, e.receiver, e.day});
  }
  return inj;
}

Injection inject_campaigns(const ActivityGraph& graph, std::span<const CampaignSpec> specs, std::uint64_t seed) {
  Injection total{graph, {}, {}, {}};
  for (const auto& spec : specs) {
    auto part = inject_campaign(total.graph, spec, seed);
    total.graph = std::move(part.graph);
    total.truth.merge(part.truth);
    total.messages.insert(total.messages.end(), part.messages.begin(), part.messages.end());
    total.records.insert(total.records.end(), part.records.begin(), part.records.end());
  }
  return total;
}

CampaignSpec shift_campaign(const CampaignSpec& spec, int delta, int horizon) {
  CampaignSpec out = spec;
  out.start_day += delta;
  out.end_day += delta;
  if (out.start_day < 1 || out.end_day > horizon) {
    throw DataError(fmt::format("campaign {} shifted by {} days leaves [1, {}]", spec.id, delta, horizon));
  }
  return out;
}

long long neighborhood_count(const ActivityGraph& graph, NodeId node, Day day) {
  const auto& edges = graph.day_edges(day);
  std::set<NodeId> hood{node};
  for (const auto& [pair, n] : edges) {
    if (pair.first == node) hood.insert(pair.second);
    if (pair.second == node) hood.insert(pair.first);
  }
  long long count = 0;
  for (const auto& [pair, n] : edges) {
    if (hood.contains(pair.first) && hood.contains(pair.second)) count += n;
  }
  return count;
}

double scan_statistic(const ActivityGraph& graph, NodeId node, Day day, const ScanConfig& config) {
  if (config.window < 1) throw ConfigError("scan window must be positive");
  if (day <= config.window || day > graph.horizon()) {
    throw DataError(fmt::format("scan statistic on day {} needs {} days of history inside [1, {}]", day,
                                config.window, graph.horizon()));
  }
  double mean = 0;
  std::vector<double> past;
  for (Day t = day - config.window; t < day; ++t) past.push_back(static_cast<double>(neighborhood_count(graph, node, t)));
  for (double x : past) mean += x;
  mean /= static_cast<double>(past.size());
  double var = 0;
  for (double x : past) var += (x - mean) * (x - mean);
  const double sigma = std::sqrt(var / static_cast<double>(past.size()));
  const double today = static_cast<double>(neighborhood_count(graph, node, day));
  if (sigma < 1e-12) return today > mean ? config.cap : 0.0;
  return std::min(config.cap, (today - mean) / sigma);
}

}  // namespace segraph
