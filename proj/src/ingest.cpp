#include "segraph/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "segraph/binary_io.hpp"

namespace segraph {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  text = trim(text);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && !text.empty();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read activity file '{}'", path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return lines;
}

bool is_header(std::string_view line, std::string_view first_column) {
  return trim(line).starts_with(first_column);
}

// Validates day range and collects an issue for anything outside [1, T].
bool resolve_day(std::string_view field, const Calendar& calendar, int line, Day& day,
                 std::vector<ParseIssue>& issues) {
  try {
    day = calendar.day_of(trim(field));
  } catch (const DataError& e) {
    issues.push_back({line, e.what()});
    return false;
  }
  if (!calendar.contains(day)) {
    issues.push_back({line, fmt::format("date {} out of range [{}, {}] (day index {})", trim(field),
                                        calendar.iso(1), calendar.iso(calendar.horizon), day)});
    return false;
  }
  return true;
}

std::vector<ActivityRecord> parse_raw_log(const std::vector<std::string>& lines, const Calendar& calendar) {
  std::vector<ActivityRecord> records;
  std::vector<ParseIssue> issues;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty()) continue;
    if (records.empty() && issues.empty() && is_header(line, "sender")) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 4) {
      issues.push_back({line_no, fmt::format("expected 4 fields, got {}", fields.size())});
      continue;
    }
    ActivityRecord rec;
    rec.line = line_no;
    bool ok = parse_int(fields[0], rec.sender);
    if (!ok) issues.push_back({line_no, fmt::format("bad sender '{}'", fields[0])});
    for (auto r : split(fields[1], ';')) {
      NodeId id = 0;
      if (!parse_int(r, id)) {
        issues.push_back({line_no, fmt::format("bad receiver '{}'", r)});
        ok = false;
        break;
      }
      rec.receivers.push_back(id);
    }
    if (!parse_int(fields[3], rec.count) || rec.count < 0) {
      issues.push_back({line_no, fmt::format("bad count '{}'", fields[3])});
      ok = false;
    }
    ok = resolve_day(fields[2], calendar, line_no, rec.day, issues) && ok;
    if (ok) records.push_back(std::move(rec));
  }
  if (!issues.empty()) throw ParseError(std::move(issues));
  return records;
}

std::vector<ActivityRecord> parse_node_day_count(const std::vector<std::string>& lines, const Calendar& calendar,
                                                 const std::string& edge_list_path) {
  if (edge_list_path.empty()) throw DataError("node-day-count format needs an edge list path");
  std::map<NodeId, std::vector<NodeId>> out_neighbors;
  std::vector<ParseIssue> issues;
  const auto edge_lines = read_lines(edge_list_path);
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const std::string_view line = trim(edge_lines[i]);
    if (line.empty() || (i == 0 && is_header(line, "sender"))) continue;
    const auto fields = split(line, ',');
    NodeId v = 0, u = 0;
    if (fields.size() != 2 || !parse_int(fields[0], v) || !parse_int(fields[1], u)) {
      issues.push_back({static_cast<int>(i) + 1, fmt::format("{}: expected `sender,receiver`", edge_list_path)});
      continue;
    }
    out_neighbors[v].push_back(u);
  }
  for (auto& [v, list] : out_neighbors) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  std::vector<ActivityRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty() || (i == 0 && is_header(line, "node"))) continue;
    const auto fields = split(line, ',');
    ActivityRecord rec;
    rec.line = line_no;
    if (fields.size() != 3 || !parse_int(fields[0], rec.sender) || !parse_int(fields[2], rec.count) ||
        rec.count < 0) {
      issues.push_back({line_no, "expected `node,date,count`"});
      continue;
    }
    if (!resolve_day(fields[1], calendar, line_no, rec.day, issues)) continue;
    if (auto it = out_neighbors.find(rec.sender); it != out_neighbors.end()) rec.receivers = it->second;
    records.push_back(std::move(rec));
  }
  if (!issues.empty()) throw ParseError(std::move(issues));
  return records;
}

}  // namespace

ParseError::ParseError(std::vector<ParseIssue> issues)
    : DataError([&] {
        std::string msg = fmt::format("{} malformed record(s):", issues.size());
        for (const auto& issue : issues) msg += fmt::format("\n  line {}: {}", issue.line, issue.message);
        return msg;
      }()),
      issues_(std::move(issues)) {}

std::vector<ActivityRecord> parse_activity_records(const std::string& path, const ParseOptions& options) {
  const auto lines = read_lines(path);
  switch (options.format) {
    case RecordFormat::kRawEmailLog:
      return parse_raw_log(lines, options.calendar);
    case RecordFormat::kNodeDayCount:
      return parse_node_day_count(lines, options.calendar, options.edge_list_path);
  }
  return {};
}

void write_activity_csv(std::span<const ActivityRecord> records, const Calendar& calendar, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path));
  out << "sender,receiver,date,count\n";
  for (const auto& r : records) {
    out << fmt::format("{},{},{},{}\n", r.sender, fmt::join(r.receivers, ";"), calendar.iso(r.day), r.count);
  }
}

long long DailySeries::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0LL); }

std::map<NodeId, DailySeries> vectorize_time_series(std::span<const ActivityRecord> records, int horizon) {
  std::map<NodeId, DailySeries> out;
  for (const auto& r : records) {
    out.try_emplace(r.sender, horizon).first->second.add(r.day, r.count);
    for (auto u : r.receivers) out.try_emplace(u, horizon);
  }
  return out;
}

ActivityGraph::ActivityGraph(int horizon, Calendar calendar)
    : horizon_(horizon), calendar_(calendar), by_day_(static_cast<std::size_t>(horizon) + 1) {
  if (horizon <= 0) throw ConfigError("graph horizon must be positive");
  calendar_.horizon = horizon;
}

void ActivityGraph::check_day(Day day) const {
  if (day < 1 || day > horizon_) throw DataError(fmt::format("day {} outside [1, {}]", day, horizon_));
}

void ActivityGraph::add_node(NodeId id) { series_.try_emplace(id, horizon_); }

void ActivityGraph::add_sent(NodeId sender, Day day, int count) {
  check_day(day);
  series_.try_emplace(sender, horizon_).first->second.add(day, count);
}

void ActivityGraph::add_emails(NodeId sender, NodeId receiver, Day day, int count) {
  check_day(day);
  if (count <= 0) return;
  add_node(sender);
  add_node(receiver);
  edges_[{sender, receiver}][day] += count;
  by_day_[static_cast<std::size_t>(day)][{sender, receiver}] += count;
}

void ActivityGraph::add_record(const ActivityRecord& record) {
  add_sent(record.sender, record.day, record.count);
  for (auto u : record.receivers) add_emails(record.sender, u, record.day, record.count);
}

std::vector<NodeId> ActivityGraph::nodes() const {
  std::vector<NodeId> ids;
  ids.reserve(series_.size());
  for (const auto& [id, _] : series_) ids.push_back(id);
  return ids;
}

const DailySeries& ActivityGraph::series(NodeId id) const {
  auto it = series_.find(id);
  if (it == series_.end()) throw DataError(fmt::format("unknown node {}", id));
  return it->second;
}

const DayCounts* ActivityGraph::edge(NodeId sender, NodeId receiver) const {
  auto it = edges_.find({sender, receiver});
  return it == edges_.end() ? nullptr : &it->second;
}

int ActivityGraph::emails(NodeId sender, NodeId receiver, Day day) const {
  if (day < 1 || day > horizon_) return 0;
  const auto& m = by_day_[static_cast<std::size_t>(day)];
  auto it = m.find({sender, receiver});
  return it == m.end() ? 0 : it->second;
}

const std::map<NodePair, int>& ActivityGraph::day_edges(Day day) const {
  check_day(day);
  return by_day_[static_cast<std::size_t>(day)];
}

std::vector<NodeId> ActivityGraph::recipients(NodeId sender, Day day) const {
  std::vector<NodeId> out;
  const auto& m = day_edges(day);
  for (auto it = m.lower_bound({sender, 0}); it != m.end() && it->first.first == sender; ++it) {
    out.push_back(it->first.second);
  }
  return out;
}

std::vector<Day> ActivityGraph::active_days() const {
  std::vector<Day> out;
  for (Day d = 1; d <= horizon_; ++d) {
    if (!by_day_[static_cast<std::size_t>(d)].empty()) out.push_back(d);
  }
  return out;
}

long long ActivityGraph::total_sent() const {
  long long sum = 0;
  for (const auto& [_, s] : series_) sum += s.total();
  return sum;
}

GraphBuild build_graph(std::span<const ActivityRecord> records, int horizon, Calendar calendar) {
  GraphBuild build{ActivityGraph(horizon, calendar), {}};
  for (const auto& r : records) {
    build.graph.add_record(r);
    if (std::find(r.receivers.begin(), r.receivers.end(), r.sender) != r.receivers.end()) {
      build.warnings.push_back(
          fmt::format("self-loop {}->{} on day {}{}", r.sender, r.sender, r.day,
                      r.line > 0 ? fmt::format(" (line {})", r.line) : std::string{}));
    }
  }
  return build;
}

InteractionHistory::InteractionHistory(const ActivityGraph& graph) {
  for (const auto& [pair, day_counts] : graph.edges()) {
    auto& days = days_[pair];
    days.reserve(day_counts.size());
    for (const auto& [day, count] : day_counts) {
      if (count >= 1) days.push_back(day);
    }
  }
}

std::span<const Day> InteractionHistory::days(NodeId sender, NodeId receiver) const {
  auto it = days_.find({sender, receiver});
  if (it == days_.end()) return {};
  return it->second;
}

int InteractionHistory::days_before(NodeId sender, NodeId receiver, Day day) const {
  const auto d = days(sender, receiver);
  return static_cast<int>(std::lower_bound(d.begin(), d.end(), day) - d.begin());
}

InteractionHistory build_interaction_history(const ActivityGraph& graph) { return InteractionHistory(graph); }

TemporalSplit temporal_split(const ActivityGraph& graph, Day cutoff) {
  if (cutoff <= 1 || cutoff > graph.horizon()) {
    throw ConfigError(fmt::format("cutoff day {} outside (1, {}]", cutoff, graph.horizon()));
  }
  TemporalSplit split{ActivityGraph(graph.horizon(), graph.calendar()),
                      ActivityGraph(graph.horizon(), graph.calendar())};
  for (const auto& [id, series] : graph.all_series()) {
    const auto counts = series.counts();
    for (Day d = 1; d <= graph.horizon(); ++d) {
      const int c = counts[static_cast<std::size_t>(d - 1)];
      if (c != 0) (d <= cutoff ? split.train : split.test).add_sent(id, d, c);
    }
  }
  for (const auto& [pair, day_counts] : graph.edges()) {
    for (const auto& [day, count] : day_counts) {
      (day <= cutoff ? split.train : split.test).add_emails(pair.first, pair.second, day, count);
    }
  }
  return split;
}

namespace {
constexpr std::string_view kGraphMagic = "SEGGRAPH";
constexpr std::uint32_t kGraphVersion = 1;
}  // namespace

void save_graph(const ActivityGraph& graph, const std::string& path) {
  ByteWriter w;
  w.put_bytes(kGraphMagic);
  w.put<std::uint32_t>(kGraphVersion);
  w.put<std::int32_t>(graph.horizon());
  const auto epoch = graph.calendar().epoch;
  w.put<std::int32_t>(static_cast<int>(epoch.year()));
  w.put<std::uint32_t>(static_cast<unsigned>(epoch.month()));
  w.put<std::uint32_t>(static_cast<unsigned>(epoch.day()));
  w.put<std::uint64_t>(graph.node_count());
  for (const auto& [id, series] : graph.all_series()) {
    w.put<std::uint32_t>(id);
    const auto counts = series.counts();
    const auto nonzero = static_cast<std::uint32_t>(std::count_if(counts.begin(), counts.end(), [](int c) { return c != 0; }));
    w.put<std::uint32_t>(nonzero);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] == 0) continue;
      w.put<std::int32_t>(static_cast<std::int32_t>(i + 1));
      w.put<std::int32_t>(counts[i]);
    }
  }
  w.put<std::uint64_t>(graph.edge_count());
  for (const auto& [pair, day_counts] : graph.edges()) {
    w.put<std::uint32_t>(pair.first);
    w.put<std::uint32_t>(pair.second);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(day_counts.size()));
    for (const auto& [day, count] : day_counts) {
      w.put<std::int32_t>(day);
      w.put<std::int32_t>(count);
    }
  }
  w.write_file(path);
  std::ofstream meta(path + ".json", std::ios::trunc);
  meta << graph_metadata_json(graph) << '\n';
}

ActivityGraph load_graph(const std::string& path) {
  auto r = ByteReader::from_file(path);
  if (r.get_bytes(kGraphMagic.size(), "magic") != kGraphMagic) r.fail("not a graph snapshot (magic mismatch)");
  if (const auto version = r.get<std::uint32_t>("version"); version != kGraphVersion) {
    r.fail(fmt::format("unsupported graph snapshot version {}", version));
  }
  const int horizon = r.get<std::int32_t>("horizon");
  if (horizon <= 0) r.fail("non-positive horizon");
  Calendar cal;
  const int y = r.get<std::int32_t>("epoch year");
  const unsigned m = r.get<std::uint32_t>("epoch month");
  const unsigned d = r.get<std::uint32_t>("epoch day");
  cal.epoch = std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!cal.epoch.ok()) r.fail("invalid epoch date");
  ActivityGraph graph(horizon, cal);
  const auto nodes = r.get<std::uint64_t>("node count");
  for (std::uint64_t i = 0; i < nodes; ++i) {
    const auto id = r.get<std::uint32_t>("node id");
    graph.add_node(id);
    const auto nonzero = r.get<std::uint32_t>("series length");
    for (std::uint32_t k = 0; k < nonzero; ++k) {
      const Day day = r.get<std::int32_t>("series day");
      const int count = r.get<std::int32_t>("series count");
      if (day < 1 || day > horizon) r.fail(fmt::format("series day {} out of range", day));
      graph.add_sent(id, day, count);
    }
  }
  const auto edges = r.get<std::uint64_t>("edge count");
  for (std::uint64_t i = 0; i < edges; ++i) {
    const auto v = r.get<std::uint32_t>("edge sender");
    const auto u = r.get<std::uint32_t>("edge receiver");
    if (!graph.has_node(v) || !graph.has_node(u)) r.fail("edge endpoint missing from node table");
    const auto n = r.get<std::uint32_t>("edge day count");
    for (std::uint32_t k = 0; k < n; ++k) {
      const Day day = r.get<std::int32_t>("edge day");
      const int count = r.get<std::int32_t>("edge multiplicity");
      if (day < 1 || day > horizon || count < 1) r.fail("invalid edge day entry");
      graph.add_emails(v, u, day, count);
    }
  }
  if (!r.at_end()) r.fail("trailing bytes after snapshot");
  return graph;
}

std::string graph_metadata_json(const ActivityGraph& graph) {
  nlohmann::json j;
  j["node_count"] = graph.node_count();
  j["edge_count"] = graph.edge_count();
  j["T"] = graph.horizon();
  j["t0"] = format_iso_date(graph.calendar().epoch);
  return j.dump(2);
}

}  // namespace segraph
