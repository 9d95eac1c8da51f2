#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "segraph/pipeline.hpp"

namespace fs = std::filesystem;
using namespace segraph;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string taus;
  std::string phases;
  std::optional<int> cutoff;
  std::optional<int> shift;
  std::vector<std::string> sets;
  bool temporal = false;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (!o.taus.empty()) c.set("eval.taus", o.taus);
  if (!o.phases.empty()) c.set("eval.phases", o.phases);
  if (o.cutoff) c.cutoff = *o.cutoff;
  if (o.shift) c.shift = *o.shift;
  c.validate();
  return c;
}

// Artifacts inside out_dir and the subcommand that writes each.
struct Artifact {
  const char* file;
  const char* producer;
};
constexpr Artifact kGraph{"graph.bin", "ingest"};
constexpr Artifact kMessages{"messages.csv", "ingest"};
constexpr Artifact kModel{"model.bin", "train-gnn"};
constexpr Artifact kAugmented{"augmented.bin", "inject"};
constexpr Artifact kTruth{"truth.csv", "inject"};
constexpr Artifact kInjected{"injected_messages.csv", "inject"};
constexpr Artifact kScores{"scores.csv", "score"};
constexpr Artifact kVerifier{"verifier.bin", "verify"};
constexpr Artifact kVerdicts{"verdicts.csv", "verify"};

std::string need(const RunConfig& c, const Artifact& a) {
  const auto p = c.path(a.file);
  if (!fs::exists(p)) throw DataError(fmt::format("{} not found: run {} first", p, a.producer));
  return p;
}

MessageStore read_messages(const RunConfig& c, const Calendar& calendar, bool with_injected) {
  MessageStore store;
  if (fs::exists(c.path(kMessages.file))) store = load_messages_csv(c.path(kMessages.file), calendar);
  if (with_injected) {
    const auto injected = load_messages_csv(need(c, kInjected), calendar);
    store.add_all(injected.records());
  }
  return store;
}

Dataset read_dataset(const RunConfig& c) {
  auto graph = load_graph(need(c, kGraph));
  auto messages = read_messages(c, graph.calendar(), false);
  return {std::move(graph), std::move(messages)};
}

void run_ingest(const RunConfig& c) {
  fs::create_directories(c.out_dir);
  const auto data = load_dataset(c);
  save_graph(data.graph, c.path(kGraph.file));
  save_messages_csv(data.messages, data.graph.calendar(), c.path(kMessages.file));
  std::ofstream(c.path("run.conf")) << c.dump();
  fmt::print("ingest: {} nodes, {} edges, {} emails, {} messages -> {}\n", data.graph.node_count(),
             data.graph.edge_count(), data.graph.total_sent(), data.messages.size(), c.out_dir);
}

void run_train_gnn(const RunConfig& c) {
  const auto graph = load_graph(need(c, kGraph));
  SageTrainLog log;
  const auto model = train_sage(graph, c.projection, c.gnn, &log);
  save_model(model, c.path(kModel.file));
  std::ofstream out(c.path("gnn_loss.csv"));
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < log.epoch_loss.size(); ++i) out << fmt::format("{},{:.6f}\n", i + 1, log.epoch_loss[i]);
  fmt::print("train-gnn: {} epochs, final loss {:.4f}, checksum {:016x}\n", log.epoch_loss.size(),
             log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back(), model.checksum());
}

void run_inject(const RunConfig& c) {
  const auto graph = load_graph(need(c, kGraph));
  const auto inj = inject_campaigns(graph, c.campaigns, c.seed);
  save_graph(inj.graph, c.path(kAugmented.file));
  save_ground_truth(inj.truth, c.path(kTruth.file));
  save_messages_csv(MessageStore(inj.messages), graph.calendar(), c.path(kInjected.file));
  fmt::print("inject: {} campaigns, {} emails, {} attack interactions\n", c.campaigns.size(), inj.records.size(),
             inj.truth.size());
  for (const auto& [id, n] : inj.truth.per_campaign()) fmt::print("  {} {}\n", id, n);
}

void run_score(const RunConfig& c) {
  const auto model = load_model(need(c, kModel));
  const auto base = load_graph(need(c, kGraph));
  const auto augmented = load_graph(need(c, kAugmented));
  const auto truth = load_ground_truth(need(c, kTruth));
  const auto messages = read_messages(c, base.calendar(), true);
  const auto provider = make_provider(c);
  const auto days = truth.attack_days();
  const auto rows = score_interactions(c, model, {base, augmented, messages, *provider}, days);
  write_scores_csv(rows, c.path(kScores.file));
  const auto flags = structural_flags(rows, c.tau, insider_threshold(c.insider));
  fmt::print("score: {} interactions on {} attack days, {} flagged at tau {:.2f}\n", rows.size(), days.size(),
             std::count(flags.begin(), flags.end(), true), c.tau);
}

void run_verify(const RunConfig& c) {
  auto scores = read_scores_csv(need(c, kScores));
  const auto data = read_dataset(c);
  const auto messages = read_messages(c, data.graph.calendar(), true);
  const auto provider = make_provider(c);
  const auto corpus = build_verifier_corpus(c, data);
  const auto samples = embed_corpus(corpus, *provider);
  TrainReport report;
  const auto params = train_head(samples, c.verifier.train, &report);
  save_verifier(params, c.path(kVerifier.file));
  {
    std::ofstream out(c.path("verifier_train.csv"));
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
      out << fmt::format("{},{:.6f}\n", i + 1, report.epoch_loss[i]);
    }
  }
  const auto flags = structural_flags(scores, c.tau, insider_threshold(c.insider));
  std::vector<ScoredInteraction> flagged;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (flags[i]) flagged.push_back(scores[i]);
  }
  const auto verdicts = verify_interactions(c, flagged, messages, *provider, params);
  write_verdicts_csv(verdicts, c.path(kVerdicts.file));

  // Insider rows get the verdict probability as their manipulation score.
  std::map<std::tuple<Day, NodeId, NodeId>, double> p_of;
  for (const auto& v : verdicts) p_of[{v.day, v.sender, v.receiver}] = v.p;
  std::ofstream out(c.path("insider.csv"));
  out << "day,sender,receiver,d_rec,d_ling,i_man,s_struct,s_insider\n";
  for (auto& row : flagged) {
    const auto it = p_of.find({row.day, row.sender, row.receiver});
    if (!row.insider || it == p_of.end()) continue;
    apply_manipulation(row, it->second, c.insider.invert_struct);
    const auto& s = *row.insider;
    out << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", row.day, row.sender, row.receiver, s.d_rec,
                       s.d_ling, s.i_man, s.s_struct, s.s_insider);
  }
  fmt::print("verify: head trained on {} samples (held-out accuracy {:.3f}); {} of {} candidates kept\n",
             samples.size(), report.test_accuracy,
             std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.flag; }), verdicts.size());
}

void print_reference(std::string_view text) { fmt::print("  reference: {}\n", text); }

void run_evaluate(const RunConfig& c, bool temporal) {
  need(c, kModel);
  const auto scores = read_scores_csv(need(c, kScores));
  const auto truth = load_ground_truth(need(c, kTruth));
  const double ins = insider_threshold(c.insider);

  auto sweep = sweep_thresholds(scores, truth, c.taus, ins);
  std::vector<EvalReport> reports{sweep};
  fmt::print("{}", format_report(sweep));
  print_reference("recall 86.0%, filter load 28.8% at tau 0.70");

  std::ofstream ab(c.path("ablation.csv"));
  ab << "phases,tau,tp,fp,recall,precision,f1,filter_load\n";
  fmt::print("\n[ablation] tau {:.2f}\n", c.tau);
  for (const auto& row : ablation(scores, truth, c.weights, c.phases, c.tau, ins)) {
    const auto& m = row.metrics;
    ab << fmt::format("{},{:.4f},{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", row.subset.label(), m.tau, m.tp, m.fp, m.recall,
                      m.precision, m.f1, m.filter_load);
    fmt::print("  {:<6} recall {:5.1f}%  precision {:5.1f}%  F1 {:.3f}\n", row.subset.label(), 100 * m.recall,
               100 * m.precision, m.f1);
  }
  print_reference("recall 19.8% (1), 61.4% (2), 86.0% (1+2+3)");

  if (fs::exists(c.path(kVerdicts.file))) {
    const auto verdicts = read_verdicts_csv(c.path(kVerdicts.file));
    const auto ts = two_stage_eval(scores, verdicts, truth, c.tau, ins);
    EvalReport two{Stage::kTwoStage, {ts.verified}};
    reports.push_back(two);
    std::ofstream out(c.path("two_stage.csv"));
    out << "tau,input_reduction,verifier_calls,stage1_recall,stage1_precision,stage2_recall,stage2_precision,"
           "stage2_recall_of_candidates\n";
    out << fmt::format("{:.4f},{:.6f},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", c.tau, ts.input_reduction,
                       ts.verifier_calls, ts.structural.recall, ts.structural.precision, ts.verified.recall,
                       ts.verified.precision, ts.recall_of_candidates);
    fmt::print("\n[two-stage] tau {:.2f}: {:.1f}% of interactions verified ({} calls)\n", c.tau,
               100 * ts.input_reduction, ts.verifier_calls);
    fmt::print("  stage 1 recall {:5.1f}%  precision {:5.1f}%\n", 100 * ts.structural.recall,
               100 * ts.structural.precision);
    fmt::print("  stage 2 recall {:5.1f}%  precision {:5.1f}%  (of candidates {:5.1f}%)\n", 100 * ts.verified.recall,
               100 * ts.verified.precision, 100 * ts.recall_of_candidates);
    print_reference("precision 11.5% -> 92.2%, 28.8% of interactions verified");
  } else {
    fmt::print("\n(no {}; run verify for the two-stage comparison)\n", kVerdicts.file);
  }
  write_report_csv(reports, c.path("report.csv"));
  write_campaign_csv(reports, c.path("campaigns.csv"));

  if (temporal) {
    const auto data = read_dataset(c);
    const auto provider = make_provider(c);
    const std::vector<double> taus{c.temporal_tau, c.tau};
    const auto result = temporal_experiment(c, data, *provider, taus);
    std::ofstream out(c.path("temporal.csv"));
    out << "arm,shift,tau,attacks,tp,recall,filter_load,checksum_before,checksum_after\n";
    fmt::print("\n[temporal] cutoff day {}, shift {} days, {} training nodes\n", c.cutoff, c.shift,
               result.train_nodes);
    for (const auto& arm : result.arms) {
      for (const auto& r : arm.rows) {
        out << fmt::format("{},{},{:.4f},{},{},{:.6f},{:.6f},{:016x},{:016x}\n", arm.label, arm.shift, r.tau,
                           arm.attacks, r.tp, r.recall, r.filter_load, result.checksum_before, result.checksum_after);
        fmt::print("  {:<8} tau {:.2f} recall {:5.1f}% ({}/{})\n", arm.label, r.tau, 100 * r.recall, r.tp,
                   arm.attacks);
      }
    }
    fmt::print("  model checksum {:016x} -> {:016x}\n", result.checksum_before, result.checksum_after);
    print_reference("recall 89.0% at tau 0.60, 76.3% at tau 0.70");
  }
}

void run_baseline(const RunConfig& c) {
  const auto augmented = load_graph(need(c, kAugmented));
  const auto scan = scan_baseline(augmented, c.campaigns, c.scan);
  write_scan_csv(scan, c.path("scan.csv"));
  fmt::print("[scan-baseline] Psi at the attacker node\n");
  for (const auto& r : scan) {
    fmt::print("  {} day {:>4} {:<10} {:6.2f}\n", r.campaign, r.day,
               r.attack_day > 0 ? fmt::format("attack #{}", r.attack_day) : std::string("after peak"), r.psi);
  }
  print_reference("burst 10.00 (day 1) -> 2.00 (day 5); insider 30.00 -> 1.30");

  const auto scores = read_scores_csv(need(c, kScores));
  const auto truth = load_ground_truth(need(c, kTruth));
  const auto params = load_verifier(need(c, kVerifier));
  const auto base = load_graph(need(c, kGraph));
  const auto messages = read_messages(c, base.calendar(), true);
  const auto provider = make_provider(c);
  const auto start = std::chrono::steady_clock::now();
  const auto verdicts = verify_interactions(c, scores, messages, *provider, params, PairContext::kNone);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_verdicts_csv(verdicts, c.path("verdicts_all.csv"));
  const auto report = verifier_only_baseline(scores, verdicts, truth);
  write_report_csv({report}, c.path("verifier_only.csv"));
  const auto& r = report.rows.front();
  fmt::print("\n[verifier-only] {} interactions verified in {:.1f}s\n", verdicts.size(), seconds);
  fmt::print("  recall {:5.1f}%  precision {:5.1f}%  F1 {:.3f}\n", 100 * r.recall, 100 * r.precision, r.f1);
  print_reference("recall 63.0% over 7,509 interactions");
}

void run_export_fixtures(const RunConfig& c) {
  const auto dir = fs::path(c.out_dir) / "fixtures";
  fs::create_directories(dir);
  BackgroundConfig bc = c.background;
  const auto bg = generate_background(bc);
  const Calendar calendar{.horizon = bc.horizon};
  write_activity_csv(bg.records, calendar, (dir / "activity.csv").string());
  save_messages_csv(bg.messages, calendar, (dir / "messages.csv").string());
  const auto graph = build_graph(bg.records, bc.horizon, calendar).graph;
  const auto inj = inject_campaigns(graph, c.campaigns, c.seed);
  save_ground_truth(inj.truth, (dir / "truth.csv").string());
  // Stub embeddings for the injected messages, in the exporter's file format.
  StubProvider stub(c.stub_seed);
  EmbeddingStore store;
  for (const auto& m : inj.messages) store.put(message_key(m.id), stub.embed({message_key(m.id), m.text()}));
  save_embedding_file(store, (dir / "injected_embeddings.bin").string());
  RunConfig fixture = c;
  fixture.activity = (dir / "activity.csv").string();
  fixture.messages = (dir / "messages.csv").string();
  std::ofstream(dir / "fixture.conf") << fixture.dump();
  fmt::print("export-fixtures: {} records, {} messages, {} attack interactions, {} embeddings -> {}\n",
             bg.records.size(), bg.messages.size(), inj.truth.size(), store.size(), dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filter-then-verify social-engineering detection over temporal communication graphs"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "config file (dotted key = value)");
  app.add_option("--seed", o.seed, "injection seed");
  app.add_option("--out-dir", o.out_dir, "artifact directory");
  app.add_option("--taus", o.taus, "threshold list, e.g. 0.65,0.70");
  app.add_option("--phases", o.phases, "phase subsets for the ablation, e.g. 1;2;1+2+3 or all");
  app.add_option("--cutoff", o.cutoff, "temporal split cutoff day");
  app.add_option("--shift", o.shift, "temporal campaign shift in days");
  app.add_option("--set", o.sets, "override one config key (key=value), repeatable");

  auto* ingest = app.add_subcommand("ingest", "load or generate activity and snapshot the graph");
  auto* train = app.add_subcommand("train-gnn", "train the structural embedding model");
  auto* inject = app.add_subcommand("inject", "inject the configured campaigns");
  auto* score = app.add_subcommand("score", "score every interaction on attack days");
  auto* verify = app.add_subcommand("verify", "train the verifier head and verify flagged interactions");
  auto* evaluate = app.add_subcommand("evaluate", "threshold sweep, ablation and two-stage reports");
  evaluate->add_flag("--temporal", o.temporal, "also run the temporal generalisation experiment");
  auto* baseline = app.add_subcommand("baseline", "scan-statistic and verifier-only baselines");
  auto* fixtures = app.add_subcommand("export-fixtures", "write fixture activity, messages and embeddings");
  app.add_subcommand("config", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto config = resolve(o);
    if (ingest->parsed()) run_ingest(config);
    else if (train->parsed()) run_train_gnn(config);
    else if (inject->parsed()) run_inject(config);
    else if (score->parsed()) run_score(config);
    else if (verify->parsed()) run_verify(config);
    else if (evaluate->parsed()) run_evaluate(config, o.temporal);
    else if (baseline->parsed()) run_baseline(config);
    else if (fixtures->parsed()) run_export_fixtures(config);
    else std::cout << config.dump();
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    fmt::print(stderr, "numeric error: {}\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
