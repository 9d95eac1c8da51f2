#include "segraph/background.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace segraph {

void BackgroundConfig::validate() const {
  if (horizon < 60) throw ConfigError("background horizon must be at least 60 days");
  if (departments < 2) throw ConfigError("background needs at least two departments");
  if (admins < 0 || peripheral < 0 || admins + peripheral > 100) throw ConfigError("bad background role counts");
  if (!(novel_contact >= 0 && novel_contact <= 1)) throw ConfigError("novel_contact must lie in [0, 1]");
  if (!(activity_min > 0 && activity_min <= activity_max && activity_max <= 1)) {
    throw ConfigError("activity range must satisfy 0 < min <= max <= 1");
  }
}

std::vector<NodeId> background_ids() {
  std::vector<NodeId> ids;
  for (NodeId i = 0; i <= 296; ++i) ids.push_back(i);
  for (NodeId i : {817u, 1017u, 1023u}) ids.push_back(i);
  return ids;
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    for (double p = uniform(); p > limit; p *= uniform()) ++k;
    return k;
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kCommon{
    "please", "thanks", "attached", "review", "meeting", "tomorrow", "update", "schedule", "call", "draft",
    "team", "week", "question", "follow", "notes", "agenda", "comments", "plan", "status", "today",
    "report", "numbers", "latest", "version", "morning", "afternoon", "discuss", "confirm", "time", "office"};

const std::vector<std::vector<std::string>> kTopics{
    {"trading", "desk", "positions", "curve", "spread", "book", "hedge", "volatility", "forward", "basis"},
    {"legal", "counsel", "agreement", "clause", "litigation", "filing", "settlement", "signature", "terms", "memo"},
    {"pipeline", "capacity", "nominations", "flow", "compressor", "station", "throughput", "interstate", "tariff", "meter"},
    {"power", "generation", "plant", "megawatt", "outage", "dispatch", "grid", "load", "peaking", "turbine"},
    {"finance", "budget", "forecast", "accrual", "ledger", "quarter", "audit", "reconciliation", "expense", "variance"},
    {"regulatory", "ferc", "commission", "docket", "testimony", "rulemaking", "compliance", "hearing", "order", "protest"},
    {"research", "model", "analysis", "simulation", "pricing", "correlation", "dataset", "regression", "estimate", "study"},
    {"recruiting", "candidate", "interview", "offer", "benefits", "review", "training", "orientation", "payroll", "policy"},
    {"technology", "server", "database", "release", "deployment", "ticket", "network", "upgrade", "backup", "patch"},
    {"origination", "customer", "deal", "structure", "proposal", "counterparty", "term", "sheet", "credit", "origination"}};

const std::vector<std::string> kNames{
    "sara", "mike", "jeff", "kay", "louise", "john", "vince", "sally", "mark", "greg", "kim", "steve",
    "tana", "phillip", "susan", "rick", "dana", "chris", "james", "elizabeth", "richard", "andy", "lisa", "kevin",
    "mary", "tom", "paul", "jane", "david", "laura", "scott", "brenda", "gary", "karen", "larry", "diana"};

const std::vector<std::string> kPersonal{
    "golf", "houston", "astros", "rodeo", "marathon", "kids", "lunch", "coffee", "weekend", "vacation", "bbq",
    "fishing", "austin", "tennis", "church", "soccer", "concert", "birthday", "dinner", "traffic", "rockets",
    "hiking", "garden", "dallas", "beach", "movie", "book", "recipe", "puppy", "camping", "cycling", "baseball",
    "football", "opera", "museum", "galveston", "trip", "holiday", "party", "gym"};

const std::vector<std::string> kAdmin{
    "reminder", "building", "maintenance", "scheduled", "weekend", "outage", "badge", "renewal", "benefits",
    "enrollment", "deadline", "holiday", "party", "rsvp", "parking", "garage", "announcement", "policy",
    "all", "employees", "floor", "elevator", "fire", "drill", "cafeteria", "closed", "united", "way", "campaign",
    "donations", "newsletter", "quarterly", "town", "hall"};

struct Person {
  NodeId id = 0;
  int dept = 0;
  Role role = Role::kRegular;
  double rate = 0.15;   // chance of sending on a weekday
  double extra = 0.5;   // poisson mean of extra emails on an active day
  std::vector<NodeId> contacts;
  std::vector<double> weights;  // cumulative
  std::string name;
  std::vector<std::string> personal;
};

bool weekend(Day d) { return (d - 1 + 4) % 7 >= 5; }  // 1999-01-01 was a Friday

}  // namespace

Background generate_background(const BackgroundConfig& config) {
  config.validate();
  Rng rng(config.seed * 0x9e3779b97f4a7c15ULL + 17);
  const auto ids = background_ids();
  std::map<NodeId, Person> people;
  for (auto id : ids) {
    Person p;
    p.id = id;
    p.dept = static_cast<int>(id % static_cast<NodeId>(config.departments));
    p.name = fmt::format("{}{}", kNames[id % kNames.size()], id);
    for (int i = 0; i < 4; ++i) p.personal.push_back(rng.pick(kPersonal));
    p.rate = config.activity_min + (config.activity_max - config.activity_min) * rng.uniform();
    p.extra = 0.2 + 0.6 * rng.uniform();
    people[id] = p;
  }
  // The insider sits with its target and is busy.
  people[1023].dept = people[145].dept;
  people[1023].rate = std::max(0.45, config.activity_max);

  // Roles: admins and rare senders drawn from ids that play no campaign part.
  const std::set<NodeId> reserved{97, 145, 171, 221, 223, 225, 226, 227, 817, 1017, 1023};
  std::vector<NodeId> pool;
  for (auto id : ids) {
    if (!reserved.contains(id)) pool.push_back(id);
  }
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.below(i)]);
  std::size_t next = 0;
  for (int i = 0; i < config.admins; ++i) {
    auto& p = people[pool[next++]];
    p.role = Role::kAdmin;
  }
  for (int i = 0; i < config.peripheral; ++i) {
    auto& p = people[pool[next++]];
    p.role = Role::kPeripheral;
    p.rate = 0.004 + 0.01 * rng.uniform();
    p.extra = 0.1;
  }

  // Contacts: mostly within the department, symmetrised.
  std::map<int, std::vector<NodeId>> by_dept;
  for (const auto& [id, p] : people) by_dept[p.dept].push_back(id);
  std::map<NodeId, std::set<NodeId>> links;
  for (auto& [id, p] : people) {
    const auto& mates = by_dept[p.dept];
    const int inside = id == 1023 ? 14 : 4 + static_cast<int>(rng.below(4));
    const int outside = id == 1023 ? 6 : 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < inside && mates.size() > 1; ++i) {
      const auto c = rng.pick(mates);
      if (c != id) links[id].insert(c);
    }
    for (int i = 0; i < outside; ++i) {
      const auto c = ids[rng.below(ids.size())];
      if (c != id) links[id].insert(c);
    }
  }
  links[1023].insert(145);
  for (const auto& [id, cs] : std::map<NodeId, std::set<NodeId>>(links)) {
    for (auto c : cs) links[c].insert(id);
  }
  for (auto& [id, p] : people) {
    p.contacts.assign(links[id].begin(), links[id].end());
    for (std::size_t i = p.contacts.size(); i > 1; --i) std::swap(p.contacts[i - 1], p.contacts[rng.below(i)]);
    double acc = 0;
    for (std::size_t r = 0; r < p.contacts.size(); ++r) {
      acc += 1.0 / static_cast<double>(r + 1);
      p.weights.push_back(acc);
    }
  }

  // Shared workload per department: busy and quiet stretches of one to four
  // weeks, so colleagues' activity series move together.
  std::vector<std::vector<double>> load(static_cast<std::size_t>(config.departments),
                                        std::vector<double>(static_cast<std::size_t>(config.horizon) + 1, 1.0));
  for (auto& days : load) {
    for (Day d = 1; d <= config.horizon;) {
      const int len = 7 + static_cast<int>(rng.below(22));
      const double u = rng.uniform();
      const double level = u < 0.3 ? 2.5 : u < 0.55 ? 0.25 : 1.0;
      for (Day t = d; t < d + len && t <= config.horizon; ++t) days[static_cast<std::size_t>(t)] = level;
      d += len;
    }
  }

  Background bg;
  for (const auto& [id, p] : people) {
    bg.department[id] = p.dept;
    bg.role[id] = p.role;
  }
  std::vector<MessageRecord> messages;
  std::size_t seq = 0;
  const auto pick_contact = [&](const Person& p) {
    if (p.contacts.empty() || rng.uniform() < config.novel_contact) {
      NodeId c = p.id;
      while (c == p.id) c = ids[rng.below(ids.size())];
      return c;
    }
    const double u = rng.uniform() * p.weights.back();
    const auto it = std::lower_bound(p.weights.begin(), p.weights.end(), u);
    return p.contacts[static_cast<std::size_t>(it - p.weights.begin())];
  };
  const auto routine_text = [&](const Person& p, MessageRecord& m) {
    const auto& topic = kTopics[static_cast<std::size_t>(p.dept) % kTopics.size()];
    m.subject = fmt::format("{} {} {}", rng.pick(topic), rng.pick(kCommon), rng.pick(topic));
    std::string body;
    const int words = 10 + static_cast<int>(rng.below(8));
    for (int w = 0; w < words; ++w) {
      const double u = rng.uniform();
      const auto& word = u < 0.4 ? rng.pick(kCommon) : u < 0.8 ? rng.pick(topic) : rng.pick(p.personal);
      body += word;
      body += ' ';
    }
    body += "regards " + p.name;
    m.body = std::move(body);
  };

  for (Day d = 1; d <= config.horizon; ++d) {
    const bool we = weekend(d);
    for (const auto& [id, p] : people) {
      if (p.role == Role::kAdmin) {
        // Announcement roughly every three weeks on a weekday.
        if (we || rng.uniform() >= 0.05) continue;
        std::vector<NodeId> to;
        for (auto c : ids) {
          if (c != id && rng.uniform() < 0.2) to.push_back(c);
        }
        if (to.empty()) continue;
        std::string subject = fmt::format("{} {} {}", rng.pick(kAdmin), rng.pick(kAdmin), rng.pick(kAdmin));
        std::string body;
        for (int w = 0; w < 14; ++w) body += rng.pick(kAdmin) + " ";
        body += "thank you " + p.name;
        if (config.messages) {
          for (auto c : to) {
            messages.push_back({fmt::format("m{:07}", seq++), id, c, d, subject, body, Label::kLegit});
          }
        }
        bg.records.push_back({id, std::move(to), d, 1, 0});
        continue;
      }
      const double busy = load[static_cast<std::size_t>(p.dept)][static_cast<std::size_t>(d)];
      const double rate = std::min(0.95, (we ? p.rate * 0.15 : p.rate) * busy);
      if (rng.uniform() >= rate) continue;
      const int n = 1 + rng.poisson(p.extra);
      for (int e = 0; e < n; ++e) {
        std::vector<NodeId> to{pick_contact(p)};
        if (rng.uniform() < 0.15) {
          const auto cc = pick_contact(p);
          if (cc != to[0]) to.push_back(cc);
        }
        MessageRecord m;
        if (config.messages) routine_text(p, m);
        for (auto c : to) {
          if (config.messages) {
            messages.push_back({fmt::format("m{:07}", seq++), id, c, d, m.subject, m.body, Label::kLegit});
          }
        }
        bg.records.push_back({id, std::move(to), d, 1, 0});
      }
    }
  }
  bg.messages = MessageStore(std::move(messages));
  return bg;
}

}  // namespace segraph
