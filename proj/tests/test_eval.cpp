#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "segraph/eval.hpp"
#include "segraph/verifier.hpp"
#include "testutil.hpp"

namespace segraph {
namespace {

ScoredInteraction row(NodeId s, NodeId r, Day d, double score) {
  ScoredInteraction x;
  x.sender = s;
  x.receiver = r;
  x.day = d;
  x.s_final = score;
  return x;
}

// Ten interactions, four of them attacks.
struct Fixture {
  std::vector<ScoredInteraction> scores{row(1, 2, 5, 0.90), row(1, 3, 5, 0.72), row(1, 4, 5, 0.40),
                                        row(9, 2, 5, 0.85), row(9, 3, 6, 0.66), row(7, 8, 6, 0.95),
                                        row(7, 6, 6, 0.10), row(6, 7, 6, 0.69), row(5, 4, 7, 0.71),
                                        row(4, 5, 7, 0.30)};
  GroundTruth truth;
  Fixture() {
    truth.add({"A", 1, 2, 5});
    truth.add({"A", 1, 3, 5});
    truth.add({"A", 1, 4, 5});
    truth.add({"B", 9, 3, 6});
  }
};

TEST(Sweep, HandEnumeratedCounts) {
  const Fixture f;
  const auto rep = sweep_thresholds(f.scores, f.truth, std::vector<double>{0.70});
  ASSERT_EQ(rep.rows.size(), 1u);
  const auto& r = rep.rows[0];
  // Flagged: (1,2) (1,3) (9,2) (7,8) (5,4); attacks among them: (1,2) (1,3).
  EXPECT_EQ(r.flagged, 5);
  EXPECT_EQ(r.tp, 2);
  EXPECT_EQ(r.fp, 3);
  EXPECT_EQ(r.fn, 2);
  EXPECT_EQ(r.total, 10);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.precision, 0.4);
  EXPECT_DOUBLE_EQ(r.f1, 2 * 0.5 * 0.4 / 0.9);
  EXPECT_DOUBLE_EQ(r.filter_load, 0.5);
  EXPECT_EQ(r.per_campaign.at("A").attacks, 3);
  EXPECT_EQ(r.per_campaign.at("A").detected, 2);
  EXPECT_EQ(r.per_campaign.at("B").detected, 0);
}

TEST(Sweep, DegenerateThresholds) {
  const Fixture f;
  const auto rep = sweep_thresholds(f.scores, f.truth, std::vector<double>{0.0, 0.99});
  EXPECT_DOUBLE_EQ(rep.rows[0].recall, 1.0);
  EXPECT_DOUBLE_EQ(rep.rows[0].filter_load, 1.0);
  EXPECT_EQ(rep.rows[1].tp, 0);
  EXPECT_EQ(rep.rows[1].precision, 0.0);
  EXPECT_THROW(sweep_thresholds(f.scores, GroundTruth{}), DataError);
}

TEST(Sweep, ClosureAndMonotonicity) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ScoredInteraction> scores;
  GroundTruth truth;
  for (int i = 0; i < 500; ++i) {
    scores.push_back(row(static_cast<NodeId>(i), static_cast<NodeId>(i + 1), 3, u(rng)));
    if (i % 7 == 0) truth.add({"X", static_cast<NodeId>(i), static_cast<NodeId>(i + 1), 3});
  }
  truth.add({"X", 9999, 1, 3});  // never scored: a false negative at every tau
  std::vector<double> taus;
  for (int k = 0; k <= 20; ++k) taus.push_back(k / 20.0);
  const auto rep = sweep_thresholds(scores, truth, taus);
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    const auto& r = rep.rows[k];
    EXPECT_EQ(r.tp + r.fn, static_cast<long>(truth.size()));
    EXPECT_EQ(r.tp + r.fp, r.flagged);
    if (k > 0) {
      EXPECT_LE(r.recall, rep.rows[k - 1].recall);
      EXPECT_LE(r.filter_load, rep.rows[k - 1].filter_load);
    }
  }
}

TEST(Sweep, InsiderRowsUseTheirOwnThreshold) {
  auto x = row(1, 2, 5, 0.2);
  x.branch = Branch::kInsider;
  x.insider = InsiderScore{0, 0, 0, 0, 0.62};
  const std::vector<ScoredInteraction> s{x};
  EXPECT_EQ(structural_flags(s, 0.70, 0.60), std::vector<bool>{true});
  EXPECT_EQ(structural_flags(s, 0.70, std::nullopt), std::vector<bool>{false});
}

TEST(Ablation, SubsetsAndSinglePhaseFallback) {
  EXPECT_EQ(all_phase_subsets().size(), 7u);
  EXPECT_EQ(parse_phase_subset("1+3").label(), "1+3");
  EXPECT_THROW(parse_phase_subset("4"), ConfigError);
  EXPECT_THROW(parse_phase_subset(""), ConfigError);
  const ScoreWeights w;
  const PhaseScores p{0.8, 0.0, 0.0};
  // The multiplicative form would give zero with s2 = s3 = 0.
  EXPECT_DOUBLE_EQ(aggregate(p, w), 0.0);
  EXPECT_DOUBLE_EQ(ablated_score(p, w, parse_phase_subset("1")), 0.8);
  const PhaseScores q{0.5, 0.6, 0.9};
  EXPECT_DOUBLE_EQ(ablated_score(q, w, parse_phase_subset("1+2")), (1 + w.w1 * 0.5) * (w.w2 * 0.6));
  EXPECT_DOUBLE_EQ(ablated_score(q, w, parse_phase_subset("123")), aggregate(q, w));
}

TEST(Ablation, RowPerSubset) {
  Fixture f;
  for (auto& s : f.scores) s.phases = {0.5, s.s_final, s.s_final};
  const auto rows = ablation(f.scores, f.truth, ScoreWeights{}, all_phase_subsets(), 0.70);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows.back().subset.label(), "1+2+3");
  EXPECT_EQ(rows[1].metrics.tp, 2);  // {2} thresholds the raw s2
}

std::vector<Verdict> verdicts_for(const std::vector<ScoredInteraction>& scores, bool flag) {
  std::vector<Verdict> v;
  for (const auto& s : scores) v.push_back({s.sender, s.receiver, s.day, flag ? 0.9 : 0.1, flag});
  return v;
}

TEST(TwoStage, AcceptAllAndRejectAll) {
  const Fixture f;
  const auto keep = two_stage_eval(f.scores, verdicts_for(f.scores, true), f.truth, 0.70);
  EXPECT_EQ(keep.verified.tp, keep.structural.tp);
  EXPECT_EQ(keep.verified.fp, keep.structural.fp);
  EXPECT_EQ(keep.verifier_calls, 5);
  EXPECT_DOUBLE_EQ(keep.input_reduction, 0.5);
  const auto drop = two_stage_eval(f.scores, verdicts_for(f.scores, false), f.truth, 0.70);
  EXPECT_EQ(drop.verified.tp, 0);
  EXPECT_EQ(drop.verified.recall, 0.0);
}

// Synthetic traffic whose class signal sits in the pair history: attack
// messages read like ordinary mail, only the context gives them away.
class ContextGenerator {
 public:
  static constexpr int kDim = 16;

  // Rows are normalise(noise + offset * e0).
  Eigen::MatrixXd rows(double offset) {
    Eigen::MatrixXd m(4, kDim);
    for (int i = 0; i < m.rows(); ++i) {
      Eigen::VectorXd r(kDim);
      for (int k = 0; k < kDim; ++k) r[k] = normal_(rng_);
      r = r.normalized();
      r[0] += offset;
      m.row(i) = r.normalized().transpose();
    }
    return m;
  }

  VerifierParams train() {
    std::vector<VerifierSample> corpus;
    for (int i = 0; i < 200; ++i) corpus.push_back({rows(i % 2 ? 1.0 : -1.0), rows(0.0), i % 2});
    TrainConfig tc;
    tc.epochs = 30;
    tc.lr = 0.01;
    tc.dims = {kDim, 8, {16, 8, 4}};
    return train_head(corpus, tc);
  }

 private:
  std::mt19937_64 rng_{17};
  std::normal_distribution<double> normal_;
};

struct ContextFixture {
  std::vector<ScoredInteraction> scores;
  GroundTruth truth;
  std::vector<VerifierSample> with_history;
  std::vector<VerifierSample> message_only;
};

// 20 attacks and 20 legit pairs above tau, 20 legit pairs below.
ContextFixture context_fixture(ContextGenerator& gen) {
  ContextFixture f;
  for (int i = 0; i < 60; ++i) {
    const bool attack = i < 20;
    const double s = attack ? 0.80 : (i < 40 ? 0.75 : 0.30);
    f.scores.push_back(row(static_cast<NodeId>(100 + i), 1, 10, s));
    if (attack) f.truth.add({"Z", static_cast<NodeId>(100 + i), 1, 10});
    const auto msg = gen.rows(0.0);
    f.with_history.push_back({gen.rows(attack ? 1.0 : -1.0), msg, attack});
    f.message_only.push_back({gen.rows(0.0), msg, attack});
  }
  return f;
}

std::vector<Verdict> run_head(const VerifierParams& p, const std::vector<ScoredInteraction>& scores,
                              const std::vector<VerifierSample>& samples) {
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double prob = predict(p, samples[i].h1, samples[i].h2);
    out.push_back({scores[i].sender, scores[i].receiver, scores[i].day, prob, prob >= 0.5});
  }
  return out;
}

TEST(TwoStage, HeadImprovesPrecisionAndBeatsMessageOnlyBaseline) {
  ContextGenerator gen;
  const auto params = gen.train();
  const auto f = context_fixture(gen);
  const auto two = two_stage_eval(f.scores, run_head(params, f.scores, f.with_history), f.truth, 0.70);
  EXPECT_DOUBLE_EQ(two.structural.precision, 0.5);
  EXPECT_GT(two.verified.precision, two.structural.precision);
  const auto base = verifier_only_baseline(f.scores, run_head(params, f.scores, f.message_only), f.truth);
  EXPECT_EQ(base.stage, Stage::kVerifierOnly);
  EXPECT_EQ(base.rows[0].total, 60);
  EXPECT_LT(base.rows[0].recall, two.verified.recall);
}

TEST(Report, CsvLayout) {
  const Fixture f;
  auto rep = sweep_thresholds(f.scores, f.truth, std::vector<double>{0.70});
  const auto path = (testing::scratch_dir("report") / "r.csv").string();
  write_report_csv({rep}, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(),
            "stage,tau,tp,fp,fn,flagged,total,recall,precision,f1,filter_load\n"
            "gnn-only,0.7000,2,3,2,5,10,0.500000,0.400000,0.444444,0.500000\n");
  EXPECT_NE(format_report(rep).find("gnn-only"), std::string::npos);
}

}  // namespace
}  // namespace segraph
