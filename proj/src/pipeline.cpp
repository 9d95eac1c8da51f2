#include "segraph/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "segraph/communities.hpp"
#include "segraph/csv.hpp"

namespace segraph {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string part; std::getline(in, part, sep);) {
    if (auto t = trim(part); !t.empty()) out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, value));
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, value));
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& part : split(value, ',')) out.push_back(parse_number<T>(key, part));
  return out;
}

std::string_view projection_name(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::kWeeklySummary: return "weekly-summary";
    case ProjectionMode::kWeeklyBin: return "weekly-bin";
    case ProjectionMode::kTruncate: return "truncate";
    case ProjectionMode::kIdentity: return "identity";
  }
  return "?";
}

ProjectionMode parse_projection(const std::string& value) {
  for (auto m : {ProjectionMode::kWeeklySummary, ProjectionMode::kWeeklyBin, ProjectionMode::kTruncate,
                 ProjectionMode::kIdentity}) {
    if (projection_name(m) == value) return m;
  }
  throw ConfigError(fmt::format("gnn.projection: unknown mode '{}'", value));
}

std::string phases_text(const std::vector<PhaseSubset>& phases) {
  std::vector<std::string> labels;
  for (const auto& p : phases) labels.push_back(p.label());
  return fmt::format("{}", fmt::join(labels, ";"));
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SEGRAPH_NUM(KEY, MEMBER, TYPE)                                                               \
  Field {                                                                                           \
    KEY, [](const RunConfig& c) { return fmt::format("{}", c.MEMBER); },                             \
        [](RunConfig& c, const std::string& v) { c.MEMBER = parse_number<TYPE>(KEY, v); }          \
  }
#define SEGRAPH_STR(KEY, MEMBER) \
  Field { KEY, [](const RunConfig& c) { return c.MEMBER; }, [](RunConfig& c, const std::string& v) { c.MEMBER = v; } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      SEGRAPH_STR("data.activity", activity),
      Field{"data.format",
            [](const RunConfig& c) {
              return std::string(c.format == RecordFormat::kRawEmailLog ? "raw-email-log" : "node-day-count");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "raw-email-log") c.format = RecordFormat::kRawEmailLog;
              else if (v == "node-day-count") c.format = RecordFormat::kNodeDayCount;
              else throw ConfigError(fmt::format("data.format: unknown format '{}'", v));
            }},
      SEGRAPH_STR("data.edges", edges),
      SEGRAPH_STR("data.messages", messages),
      SEGRAPH_STR("data.embeddings", embeddings),
      SEGRAPH_STR("out_dir", out_dir),
      SEGRAPH_NUM("seed", seed, std::uint64_t),
      SEGRAPH_NUM("provider.stub_seed", stub_seed, std::uint64_t),
      SEGRAPH_NUM("background.seed", background.seed, std::uint64_t),
      SEGRAPH_NUM("background.horizon", background.horizon, int),
      SEGRAPH_NUM("background.departments", background.departments, int),
      SEGRAPH_NUM("background.admins", background.admins, int),
      SEGRAPH_NUM("background.peripheral", background.peripheral, int),
      SEGRAPH_NUM("background.novel_contact", background.novel_contact, double),
      SEGRAPH_NUM("background.activity_min", background.activity_min, double),
      SEGRAPH_NUM("background.activity_max", background.activity_max, double),
      Field{"gnn.projection", [](const RunConfig& c) { return std::string(projection_name(c.projection.mode)); },
            [](RunConfig& c, const std::string& v) { c.projection.mode = parse_projection(v); }},
      SEGRAPH_NUM("gnn.input_dim", projection.input_dim, int),
      SEGRAPH_NUM("gnn.epochs", gnn.epochs, int),
      SEGRAPH_NUM("gnn.steps_per_epoch", gnn.steps_per_epoch, int),
      SEGRAPH_NUM("gnn.lr", gnn.lr, double),
      Field{"gnn.fanout", [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.gnn.fanout, ",")); },
            [](RunConfig& c, const std::string& v) {
              const auto f = parse_list<int>("gnn.fanout", v);
              if (f.size() != 3) throw ConfigError("gnn.fanout: expected three values");
              std::copy(f.begin(), f.end(), c.gnn.fanout.begin());
            }},
      SEGRAPH_NUM("gnn.negatives", gnn.negatives, int),
      SEGRAPH_NUM("gnn.logit_scale", gnn.logit_scale, double),
      SEGRAPH_NUM("gnn.seed", gnn.seed, std::uint64_t),
      Field{"gnn.hidden", [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.gnn.hidden, ",")); },
            [](RunConfig& c, const std::string& v) {
              const auto h = parse_list<int>("gnn.hidden", v);
              if (h.size() != 2) throw ConfigError("gnn.hidden: expected two values");
              std::copy(h.begin(), h.end(), c.gnn.hidden.begin());
            }},
      SEGRAPH_NUM("gnn.output_dim", gnn.output_dim, int),
      SEGRAPH_NUM("phase2.alpha", weights.alpha, double),
      SEGRAPH_NUM("phase2.beta", weights.beta, double),
      SEGRAPH_NUM("phase2.gamma", weights.gamma, double),
      SEGRAPH_NUM("agg.w1", weights.w1, double),
      SEGRAPH_NUM("agg.w2", weights.w2, double),
      SEGRAPH_NUM("agg.w3", weights.w3, double),
      SEGRAPH_NUM("insider.n_est", insider.n_est, int),
      SEGRAPH_NUM("insider.threshold", insider.threshold, double),
      Field{"insider.invert_struct", [](const RunConfig& c) { return fmt::format("{}", c.insider.invert_struct); },
            [](RunConfig& c, const std::string& v) { c.insider.invert_struct = parse_bool("insider.invert_struct", v); }},
      SEGRAPH_NUM("verifier.epochs", verifier.train.epochs, int),
      SEGRAPH_NUM("verifier.lr", verifier.train.lr, double),
      SEGRAPH_NUM("verifier.batch_size", verifier.train.batch_size, int),
      SEGRAPH_NUM("verifier.seed", verifier.train.seed, std::uint64_t),
      SEGRAPH_NUM("verifier.train_fraction", verifier.train.train_fraction, double),
      Field{"verifier.corpus_seeds",
            [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.verifier.corpus_seeds, ",")); },
            [](RunConfig& c, const std::string& v) {
              c.verifier.corpus_seeds = parse_list<std::uint64_t>("verifier.corpus_seeds", v);
            }},
      SEGRAPH_NUM("verifier.negatives", verifier.negatives, int),
      SEGRAPH_NUM("verifier.broadcast_negatives", verifier.broadcast_negatives, int),
      SEGRAPH_NUM("verifier.broadcast_fanout", verifier.broadcast_fanout, int),
      SEGRAPH_NUM("verifier.summary_budget", verifier.summary_budget, int),
      SEGRAPH_NUM("eval.tau", tau, double),
      Field{"eval.taus", [](const RunConfig& c) { return fmt::format("{}", fmt::join(c.taus, ",")); },
            [](RunConfig& c, const std::string& v) { c.taus = parse_list<double>("eval.taus", v); }},
      Field{"eval.phases", [](const RunConfig& c) { return phases_text(c.phases); },
            [](RunConfig& c, const std::string& v) {
              c.phases.clear();
              if (v == "all") {
                c.phases = all_phase_subsets();
                return;
              }
              for (const auto& part : split(v, ';')) c.phases.push_back(parse_phase_subset(part));
            }},
      SEGRAPH_NUM("temporal.cutoff", cutoff, int),
      SEGRAPH_NUM("temporal.shift", shift, int),
      SEGRAPH_NUM("temporal.tau", temporal_tau, double),
      SEGRAPH_NUM("scan.window", scan.window, int),
      SEGRAPH_NUM("scan.cap", scan.cap, double),
  };
  return table;
}

#undef SEGRAPH_NUM
#undef SEGRAPH_STR

Day parse_day(const std::string& key, const std::string& value) {
  if (value.find('-') != std::string::npos) return Calendar{}.day_of(value);
  return parse_number<int>(key, value);
}

void set_campaign_field(RunConfig& c, const std::string& key, const std::string& value) {
  const auto rest = key.substr(std::string_view("campaign.").size());
  const auto dot = rest.find('.');
  if (dot == std::string::npos || dot == 0) throw ConfigError(fmt::format("unknown key '{}'", key));
  const auto id = rest.substr(0, dot);
  const auto field = rest.substr(dot + 1);
  auto it = std::find_if(c.campaigns.begin(), c.campaigns.end(), [&](const auto& s) { return s.id == id; });
  if (it == c.campaigns.end()) {
    CampaignSpec spec;
    spec.id = id;
    c.campaigns.push_back(std::move(spec));
    it = std::prev(c.campaigns.end());
  }
  auto& s = *it;
  if (field == "attacker") s.attacker = parse_number<NodeId>(key, value);
  else if (field == "targets") s.targets = parse_list<NodeId>(key, value);
  else if (field == "start") s.start_day = parse_day(key, value);
  else if (field == "end") s.end_day = parse_day(key, value);
  else if (field == "emails") s.n_emails = parse_number<int>(key, value);
  else if (field == "replies") s.replies = parse_number<int>(key, value);
  else if (field == "pattern") s.pattern = parse_pattern(value);
  else if (field == "principle") s.principle = value;
  else if (field == "burst_size") s.burst_size = parse_number<int>(key, value);
  else if (field == "waves") s.waves = parse_number<int>(key, value);
  else throw ConfigError(fmt::format("unknown key '{}'", key));
}

void require(bool ok, std::string_view message) {
  if (!ok) throw ConfigError(std::string(message));
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "campaigns") {
    if (value == "builtin") campaigns = builtin_campaigns();
    else if (value == "none") campaigns.clear();
    else throw ConfigError(fmt::format("campaigns: expected builtin or none, got '{}'", value));
    return;
  }
  if (key.starts_with("campaign.")) {
    set_campaign_field(*this, key, value);
    return;
  }
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown key '{}'", key));
}

void RunConfig::validate() const {
  require(!out_dir.empty(), "out_dir must not be empty");
  require(format != RecordFormat::kNodeDayCount || !edges.empty(), "data.format node-day-count needs data.edges");
  background.validate();
  require(projection.input_dim > 0, "gnn.input_dim must be positive");
  require(gnn.epochs >= 1 && gnn.steps_per_epoch >= 1, "gnn.epochs and gnn.steps_per_epoch must be >= 1");
  require(gnn.lr > 0, "gnn.lr must be positive");
  require(gnn.negatives >= 1, "gnn.negatives must be >= 1");
  require(gnn.output_dim >= 1 && gnn.hidden[0] >= 1 && gnn.hidden[1] >= 1, "gnn widths must be positive");
  for (int f : gnn.fanout) require(f >= 1, "gnn.fanout entries must be >= 1");
  weights.validate();
  insider.validate();
  const auto& v = verifier;
  require(v.train.epochs >= 1 && v.train.batch_size >= 1, "verifier.epochs and verifier.batch_size must be >= 1");
  require(v.train.lr > 0, "verifier.lr must be positive");
  require(v.train.train_fraction > 0 && v.train.train_fraction < 1, "verifier.train_fraction must be in (0, 1)");
  require(!v.corpus_seeds.empty(), "verifier.corpus_seeds must not be empty");
  require(std::find(v.corpus_seeds.begin(), v.corpus_seeds.end(), seed) == v.corpus_seeds.end(),
          "verifier.corpus_seeds must differ from the injection seed");
  require(v.negatives >= 1 && v.broadcast_negatives >= 0 && v.broadcast_fanout >= 2,
          "verifier negatives must be >= 1 and broadcast_fanout >= 2");
  require(v.summary_budget >= 1, "verifier.summary_budget must be >= 1");
  require(tau >= 0 && tau <= 1, "eval.tau must be in [0, 1]");
  require(!taus.empty(), "eval.taus must not be empty");
  for (double t : taus) require(t >= 0 && t <= 1, "eval.taus entries must be in [0, 1]");
  require(!phases.empty(), "eval.phases must not be empty");
  require(temporal_tau >= 0 && temporal_tau <= 1, "temporal.tau must be in [0, 1]");
  require(cutoff > 1 && cutoff < background.horizon, "temporal.cutoff must satisfy 1 < cutoff < horizon");
  require(scan.window >= 1 && scan.cap > 0, "scan.window and scan.cap must be positive");
  std::set<std::string> ids;
  for (const auto& c : campaigns) {
    c.validate(background.horizon);
    require(ids.insert(c.id).second, "campaign ids must be unique");
  }
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(*this));
  out += "campaigns = none\n";
  for (const auto& c : campaigns) {
    const auto p = fmt::format("campaign.{}.", c.id);
    out += fmt::format("{}attacker = {}\n{}targets = {}\n{}start = {}\n{}end = {}\n", p, c.attacker, p,
                       fmt::join(c.targets, ","), p, c.start_day, p, c.end_day);
    out += fmt::format("{}emails = {}\n{}replies = {}\n{}pattern = {}\n{}principle = {}\n", p, c.n_emails, p,
                       c.replies, p, to_string(c.pattern), p, c.principle);
    out += fmt::format("{}burst_size = {}\n{}waves = {}\n", p, c.burst_size, p, c.waves);
  }
  return out;
}

std::string RunConfig::path(const std::string& name) const { return (std::filesystem::path(out_dir) / name).string(); }

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", origin, line_no));
    try {
      config.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    } catch (const DataError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

Dataset load_dataset(const RunConfig& config) {
  if (config.activity.empty()) {
    auto bg = generate_background(config.background);
    auto build = build_graph(bg.records, config.background.horizon);
    return {std::move(build.graph), std::move(bg.messages)};
  }
  const Calendar calendar{.horizon = config.background.horizon};
  ParseOptions options{config.format, calendar, config.edges};
  const auto records = parse_activity_records(config.activity, options);
  auto build = build_graph(records, calendar.horizon, calendar);
  MessageStore messages;
  if (!config.messages.empty()) messages = load_messages_csv(config.messages, calendar);
  return {std::move(build.graph), std::move(messages)};
}

std::unique_ptr<EmbeddingProvider> make_provider(const RunConfig& config) {
  if (config.embeddings.empty()) return std::make_unique<StubProvider>(config.stub_seed);
  return std::make_unique<FileProvider>(load_embedding_file(config.embeddings));
}

Eigen::VectorXd CachingProvider::pooled(const ContentRequest& request) const {
  const auto key = request.key.empty() ? text_key(request.text) : request.key;
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  return cache_.emplace(key, inner_.pooled(request)).first->second;
}

std::vector<ScoredInteraction> score_interactions(const RunConfig& config, const SageModel& model,
                                                  const ScoreContext& ctx, std::span<const Day> days) {
  const auto embeddings = embed_all(model, ctx.graph);
  const InteractionHistory history(ctx.graph);
  const auto partition = detect_communities(ctx.graph);
  const auto training = training_nodes(ctx.training_graph);
  const ScoringInputs inputs{ctx.graph, embeddings, history, partition, config.weights};
  const CachingProvider provider(ctx.provider);
  std::map<std::pair<NodeId, Day>, InsiderProfile> profiles;

  const BranchRouter router = [&](NodeId s, NodeId r, Day d) {
    return is_established_internal_pair(training, ctx.graph, s, r, d, config.insider.n_est) ? Branch::kInsider
                                                                                              : Branch::kStandard;
  };
  const InsiderScorer scorer = [&](const ScoredInteraction& row) {
    const double d_rec = pairwise_recipient_deviation(ctx.graph, row.sender, row.receiver, row.day);
    double d_ling = 0;
    const auto current = ctx.messages.on_day(row.sender, row.receiver, row.day);
    if (!current.empty()) {
      auto it = profiles.find({row.sender, row.day});
      if (it == profiles.end()) {
        it = profiles.emplace(std::pair{row.sender, row.day},
                              build_profile(ctx.messages, provider, row.sender, row.day)).first;
      }
      if (!it->second.empty()) {
        for (const auto* m : current) {
          const auto seq = provider.embed({message_key(m->id), m->text()});
          d_ling = std::max(d_ling, linguistic_drift(seq.pooled(), seq.provenance, it->second));
        }
      }
    }
    return insider_score(d_rec, d_ling, 0.0, row.phases.sim, config.insider.invert_struct);
  };

  std::vector<ScoredInteraction> out;
  for (Day d : days) {
    auto rows = score_day(inputs, d, router, scorer);
    out.insert(out.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
  }
  return out;
}

void apply_manipulation(ScoredInteraction& row, double i_man, bool invert_struct) {
  if (!row.insider) return;
  const auto& s = *row.insider;
  row.insider = insider_score(s.d_rec, s.d_ling, i_man, s.s_struct, invert_struct);
}

std::string history_summary(const MessageStore& messages, NodeId sender, NodeId receiver, Day day, int budget) {
  std::vector<std::string> texts;
  for (const auto* m : messages.between_before(sender, receiver, day)) texts.push_back(m->text());
  return summarize_history(texts, budget);
}

std::vector<CorpusItem> build_verifier_corpus(const RunConfig& config, const Dataset& data) {
  const auto& vc = config.verifier;
  if (data.messages.size() == 0) throw DataError("verifier training needs message text (set data.messages)");
  std::vector<CorpusItem> items;
  for (auto seed : vc.corpus_seeds) {
    const auto inj = inject_campaigns(data.graph, config.campaigns, seed);
    // Campaign pairs can also have background history (the insider).
    MessageStore pair_messages(inj.messages);
    for (const auto& m : inj.messages) {
      std::vector<const MessageRecord*> past = data.messages.between_before(m.sender, m.receiver, m.day);
      const auto injected = pair_messages.between_before(m.sender, m.receiver, m.day);
      past.insert(past.end(), injected.begin(), injected.end());
      std::stable_sort(past.begin(), past.end(),
                       [](const auto* a, const auto* b) { return std::tie(a->day, a->id) < std::tie(b->day, b->id); });
      std::vector<std::string> texts;
      for (const auto* p : past) texts.push_back(p->text());
      items.push_back({summarize_history(texts, vc.summary_budget), m, m.label == Label::kAttack ? 1 : 0});
    }
  }

  const auto& records = data.messages.records();
  std::vector<std::size_t> legit;
  std::map<std::pair<NodeId, Day>, int> fanout;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::kAttack) continue;
    legit.push_back(i);
    ++fanout[{records[i].sender, records[i].day}];
  }
  std::vector<std::size_t> broadcast;
  for (auto i : legit) {
    if (fanout[{records[i].sender, records[i].day}] >= vc.broadcast_fanout) broadcast.push_back(i);
  }
  std::mt19937_64 rng(vc.train.seed * 0x9e3779b97f4a7c15ULL + 3);
  std::set<std::size_t> chosen;
  const auto draw = [&](const std::vector<std::size_t>& pool, int n) {
    const int want = std::min<int>(n, static_cast<int>(pool.size()));
    for (int got = 0; got < want;) {
      if (chosen.insert(pool[rng() % pool.size()]).second) ++got;
    }
  };
  draw(broadcast, vc.broadcast_negatives);
  draw(legit, vc.negatives);
  for (auto i : chosen) {
    const auto& m = records[i];
    items.push_back({history_summary(data.messages, m.sender, m.receiver, m.day, vc.summary_budget), m, 0});
  }
  return items;
}

std::vector<VerifierSample> embed_corpus(std::span<const CorpusItem> corpus, const EmbeddingProvider& provider) {
  std::vector<VerifierSample> out;
  out.reserve(corpus.size());
  for (const auto& item : corpus) {
    const auto& m = item.message;
    const auto h1 = provider.embed({history_key(m.sender, m.receiver, m.day), item.summary});
    const auto h2 = provider.embed({message_key(m.id), m.text()});
    out.push_back({h1.rows.cast<double>(), h2.rows.cast<double>(), item.label});
  }
  return out;
}

std::vector<Verdict> verify_interactions(const RunConfig& config, std::span<const ScoredInteraction> rows,
                                         const MessageStore& messages, const EmbeddingProvider& provider,
                                         const VerifierParams& params, PairContext context) {
  std::vector<Verdict> out;
  for (const auto& row : rows) {
    const auto current = messages.on_day(row.sender, row.receiver, row.day);
    if (current.empty()) continue;
    const ContentRequest summary =
        context == PairContext::kHistory
            ? ContentRequest{history_key(row.sender, row.receiver, row.day),
                             history_summary(messages, row.sender, row.receiver, row.day,
                                             config.verifier.summary_budget)}
            : ContentRequest{"", std::string(kNoPriorContact)};
    Verdict v{row.sender, row.receiver, row.day, 0.0, false};
    for (const auto* m : current) {
      v.p = std::max(v.p, verify_pair(row, summary, {message_key(m->id), m->text()}, provider, params).p);
    }
    v.flag = v.p >= 0.5;
    out.push_back(v);
  }
  return out;
}

Detection detect(const RunConfig& config, const Dataset& data, const SageModel& model,
                 const EmbeddingProvider& provider) {
  Detection det{inject_campaigns(data.graph, config.campaigns, config.seed), data.messages, {}};
  det.messages.add_all(det.injection.messages);
  const auto days = det.injection.truth.attack_days();
  det.scores = score_interactions(config, model, {data.graph, det.injection.graph, det.messages, provider}, days);
  return det;
}

TemporalResult temporal_experiment(const RunConfig& config, const Dataset& data, const EmbeddingProvider& provider,
                                   std::span<const double> taus) {
  const auto split = temporal_split(data.graph, config.cutoff);
  const auto model = train_sage(split.train, config.projection, config.gnn);
  TemporalResult result;
  result.checksum_before = model.checksum();
  result.train_nodes = split.train.node_count();
  for (int shift : {0, config.shift}) {
    std::vector<CampaignSpec> specs;
    for (const auto& c : config.campaigns) specs.push_back(shift_campaign(c, shift, data.graph.horizon()));
    const auto inj = inject_campaigns(data.graph, specs, config.seed);
    MessageStore messages = data.messages;
    messages.add_all(inj.messages);
    const auto days = inj.truth.attack_days();
    const auto rows = score_interactions(config, model, {split.train, inj.graph, messages, provider}, days);
    TemporalArm arm{shift == 0 ? "original" : "shifted", shift, inj.truth.size(), {}};
    for (double t : taus) {
      arm.rows.push_back(confusion(rows, structural_flags(rows, t, insider_threshold(config.insider)), inj.truth, t));
    }
    result.arms.push_back(std::move(arm));
  }
  result.checksum_after = model.checksum();
  return result;
}

std::vector<ScanRow> scan_baseline(const ActivityGraph& graph, std::span<const CampaignSpec> specs,
                                   const ScanConfig& scan) {
  std::vector<ScanRow> out;
  for (const auto& spec : specs) {
    std::set<Day> days;
    for (const auto& e : schedule_campaign(spec)) {
      if (!e.reply) days.insert(e.day);
    }
    const auto first = out.size();
    int rank = 0;
    for (Day d : days) {
      ++rank;
      if (d <= scan.window) continue;
      out.push_back({spec.id, spec.attacker, d, rank, scan_statistic(graph, spec.attacker, d, scan)});
    }
    if (out.size() == first) continue;
    const auto peak = std::max_element(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                                       [](const auto& a, const auto& b) { return a.psi < b.psi; });
    const Day after = peak->day + 1;
    if (after <= graph.horizon() && !days.contains(after)) {
      out.push_back({spec.id, spec.attacker, after, 0, scan_statistic(graph, spec.attacker, after, scan)});
    }
  }
  return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write {}", path));
  return out;
}

std::vector<std::vector<std::string>> read_table(const std::string& path, std::string_view header) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read {}", path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != header) {
    throw DataError(fmt::format("{}: expected header '{}'", path, header));
  }
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  const auto columns = split(std::string(header), ',').size();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    if (!csv::split_line(trim(line), f) || f.size() != columns) {
      throw DataError(fmt::format("{}:{}: expected {} fields", path, line_no, columns));
    }
    rows.push_back(std::move(f));
  }
  return rows;
}

double to_double(const std::string& s, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(fmt::format("{}: bad number '{}'", path, s));
}

long to_long(const std::string& s, const std::string& path) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError(fmt::format("{}: bad integer '{}'", path, s));
  return v;
}

constexpr std::string_view kScoresHeader =
    "day,sender,receiver,s1,s2,s3,s_final,branch,z,f,sim,comm_frac,d_rec,d_ling,i_man,s_struct,s_insider";
constexpr std::string_view kVerdictsHeader = "day,sender,receiver,p,flag";

}  // namespace

void write_scores_csv(std::span<const ScoredInteraction> rows, const std::string& path) {
  auto out = open_out(path);
  out << kScoresHeader << '\n';
  for (const auto& r : rows) {
    const auto& p = r.phases;
    out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g}", r.day, r.sender,
                       r.receiver, p.s1, p.s2, p.s3, r.s_final, to_string(r.branch), p.z, p.f, p.sim, p.comm_frac);
    if (r.insider) {
      const auto& s = *r.insider;
      out << fmt::format(",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.d_rec, s.d_ling, s.i_man, s.s_struct,
                         s.s_insider);
    } else {
      out << ",,,,,\n";
    }
  }
}

std::vector<ScoredInteraction> read_scores_csv(const std::string& path) {
  std::vector<ScoredInteraction> out;
  for (const auto& f : read_table(path, kScoresHeader)) {
    ScoredInteraction r;
    r.day = static_cast<Day>(to_long(f[0], path));
    r.sender = static_cast<NodeId>(to_long(f[1], path));
    r.receiver = static_cast<NodeId>(to_long(f[2], path));
    if (f[7] == to_string(Branch::kInsider)) r.branch = Branch::kInsider;
    else if (f[7] != to_string(Branch::kStandard)) throw DataError(fmt::format("{}: bad branch '{}'", path, f[7]));
    auto& p = r.phases;
    double* slots[] = {&p.s1, &p.s2, &p.s3, &r.s_final, nullptr, &p.z, &p.f, &p.sim, &p.comm_frac};
    for (std::size_t i = 0; i < std::size(slots); ++i) {
      if (slots[i]) *slots[i] = to_double(f[3 + i], path);
    }
    if (r.branch == Branch::kInsider) {
      InsiderScore s;
      double* ins[] = {&s.d_rec, &s.d_ling, &s.i_man, &s.s_struct, &s.s_insider};
      for (std::size_t i = 0; i < std::size(ins); ++i) *ins[i] = to_double(f[12 + i], path);
      r.insider = s;
    }
    out.push_back(r);
  }
  return out;
}

void write_verdicts_csv(std::span<const Verdict> verdicts, const std::string& path) {
  auto out = open_out(path);
  out << kVerdictsHeader << '\n';
  for (const auto& v : verdicts) {
    out << fmt::format("{},{},{},{:.17g},{}\n", v.day, v.sender, v.receiver, v.p, v.flag ? 1 : 0);
  }
}

std::vector<Verdict> read_verdicts_csv(const std::string& path) {
  std::vector<Verdict> out;
  for (const auto& f : read_table(path, kVerdictsHeader)) {
    Verdict v;
    v.day = static_cast<Day>(to_long(f[0], path));
    v.sender = static_cast<NodeId>(to_long(f[1], path));
    v.receiver = static_cast<NodeId>(to_long(f[2], path));
    v.p = to_double(f[3], path);
    v.flag = to_long(f[4], path) != 0;
    out.push_back(v);
  }
  return out;
}

void write_scan_csv(std::span<const ScanRow> rows, const std::string& path) {
  auto out = open_out(path);
  out << "campaign,node,day,attack_day,psi\n";
  for (const auto& r : rows) out << fmt::format("{},{},{},{},{:.6f}\n", r.campaign, r.node, r.day, r.attack_day, r.psi);
}

}  // namespace segraph
