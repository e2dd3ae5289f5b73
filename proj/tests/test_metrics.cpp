#include "mpox/metrics.hpp"
#include "mpox/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace mpox;
using mpox::testing::TempDir;

namespace {

// Label/prediction multisets for the reported test outcome:
// 152 Monkeypox hits, 10 misses, 9 false alarms, 149 correct rejections.
void reported_outcome(std::vector<int>& labels, std::vector<int>& preds) {
  auto push = [&](int label, int pred, int count) {
    for (int i = 0; i < count; ++i) {
      labels.push_back(label);
      preds.push_back(pred);
    }
  };
  push(0, 0, 152);
  push(0, 1, 10);
  push(1, 0, 9);
  push(1, 1, 149);
}

ConfusionMatrix tally(const std::vector<int>& labels, const std::vector<int>& preds, int positive) {
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pos = labels[i] == positive, hit = preds[i] == positive;
    if (pos && hit) ++cm.tp;
    if (pos && !hit) ++cm.fn;
    if (!pos && hit) ++cm.fp;
    if (!pos && !hit) ++cm.tn;
  }
  return cm;
}

}  // namespace

TEST(Confusion, ReportedOutcome) {
  std::vector<int> labels, preds;
  reported_outcome(labels, preds);
  const ConfusionMatrix cm = confusion(labels, preds);
  EXPECT_EQ(cm, (ConfusionMatrix{152, 10, 9, 149}));
  EXPECT_EQ(cm.total(), 320);
}

TEST(Confusion, MatchesBruteForceTally) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(1 + rng.below(60)), preds(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = int(rng.below(2));
      preds[i] = int(rng.below(2));
    }
    for (int positive : {0, 1}) EXPECT_EQ(confusion(labels, preds, positive), tally(labels, preds, positive));
  }
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(confusion(a, b), std::invalid_argument);
}

TEST(Report, ReportedCounts) {
  const ClassificationReport r = report({152, 10, 9, 149});
  EXPECT_DOUBLE_EQ(r.accuracy, 301.0 / 320.0);
  EXPECT_NEAR(r.accuracy, 0.9406, 5e-5);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 152.0 / 161.0);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 152.0 / 162.0);
  EXPECT_NEAR(r.per_class[0].precision, 0.9441, 5e-5);
  EXPECT_NEAR(r.per_class[0].recall, 0.9383, 5e-5);
  EXPECT_NEAR(r.per_class[0].f1, 0.9412, 5e-5);
  EXPECT_EQ(r.per_class[0].support, 162);
  EXPECT_EQ(r.per_class[1].support, 158);
  EXPECT_FALSE(r.degenerate());
  const std::string text = render_report(r, {"Monkeypox", "Non_Monkeypox"});
  EXPECT_NE(text.find("0.94"), std::string::npos);
}

TEST(Report, RecomputedFromDefinitions) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const ConfusionMatrix cm{std::int64_t(1 + rng.below(50)), std::int64_t(rng.below(50)),
                             std::int64_t(rng.below(50)), std::int64_t(1 + rng.below(50))};
    const ClassificationReport r = report(cm);
    const double tp = double(cm.tp), fn = double(cm.fn), fp = double(cm.fp), tn = double(cm.tn);
    const double p0 = tp / (tp + fp), r0 = tp / (tp + fn);
    const double p1 = tn / (tn + fn), r1 = tn / (tn + fp);
    const double f0 = 2 * p0 * r0 / (p0 + r0), f1 = 2 * p1 * r1 / (p1 + r1);
    EXPECT_NEAR(r.per_class[0].precision, p0, 1e-12);
    EXPECT_NEAR(r.per_class[0].recall, r0, 1e-12);
    EXPECT_NEAR(r.per_class[1].precision, p1, 1e-12);
    EXPECT_NEAR(r.per_class[1].recall, r1, 1e-12);
    EXPECT_NEAR(r.per_class[0].f1, f0, 1e-12);
    EXPECT_NEAR(r.macro.precision, (p0 + p1) / 2, 1e-12);
    EXPECT_NEAR(r.macro.f1, (f0 + f1) / 2, 1e-12);
    EXPECT_NEAR(r.accuracy, (tp + tn) / (tp + fn + fp + tn), 1e-12);
  }
}

TEST(Report, DegenerateCountsAreFlagged) {
  // Nothing predicted positive: precision of class 0 has a zero denominator.
  const ClassificationReport r = report({0, 5, 0, 5});
  EXPECT_TRUE(r.per_class[0].precision_undefined);
  EXPECT_EQ(r.per_class[0].precision, 0.0);
  EXPECT_TRUE(r.degenerate());
  EXPECT_TRUE(std::isfinite(r.macro.f1));
}

TEST(Report, SwappingClassesSwapsRows) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const ConfusionMatrix cm{std::int64_t(rng.below(30)), std::int64_t(rng.below(30)),
                             std::int64_t(rng.below(30)), std::int64_t(rng.below(30))};
    if (cm.total() == 0) continue;
    const ClassificationReport a = report(cm), b = report(cm.swapped());
    EXPECT_EQ(a.per_class[0].precision, b.per_class[1].precision);
    EXPECT_EQ(a.per_class[0].recall, b.per_class[1].recall);
    EXPECT_EQ(a.per_class[1].f1, b.per_class[0].f1);
    EXPECT_EQ(a.accuracy, b.accuracy);
    EXPECT_NEAR(a.macro.f1, b.macro.f1, 1e-15);
  }
}

TEST(Roc, PerfectAndConstantScores) {
  const std::vector<int> labels{0, 0, 1, 1};
  const std::vector<double> perfect{0.9, 0.8, 0.2, 0.1};
  EXPECT_EQ(roc_auc(perfect, labels).auc, 1.0);
  const std::vector<double> flat{0.5, 0.5, 0.5, 0.5};
  const RocCurve c = roc_auc(flat, labels);
  EXPECT_EQ(c.auc, 0.5);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
  const std::vector<int> one_class{0, 0, 0, 0};
  EXPECT_THROW(roc_auc(perfect, one_class), std::invalid_argument);
}

TEST(Roc, MatchesPairwiseOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(80);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = double(rng.below(12)) / 11.0;  // coarse grid forces ties
      labels[i] = int(rng.below(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    for (int positive : {0, 1})
      EXPECT_NEAR(roc_auc(scores, labels, positive).auc, oracle::pairwise_auc(scores, labels, positive), 1e-12);
  }
}

TEST(Roc, ExhaustiveSmallInputs) {
  // Every labelling and every score assignment from {0, 0.5, 1} up to 6 samples.
  for (std::size_t n = 2; n <= 6; ++n) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (std::size_t mask = 1; mask + 1 < (std::size_t(1) << n); ++mask) {
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = int((mask >> i) & 1);
      for (std::size_t code = 0; code < combos; ++code) {
        std::vector<double> scores(n);
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i, c /= 3) scores[i] = double(c % 3) / 2.0;
        ASSERT_NEAR(roc_auc(scores, labels).auc, oracle::pairwise_auc(scores, labels, 0), 1e-12);
      }
    }
  }
}

TEST(Roc, InvariantUnderMonotoneTransforms) {
  Rng rng(5);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    labels[i] = int(rng.below(2));
    scores[i] = rng.uniform(-3, 3) + (labels[i] == 0 ? 0.7 : 0.0);
  }
  const double base = roc_auc(scores, labels).auc;
  std::vector<double> affine(scores.size()), logistic(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    affine[i] = 3.0 * scores[i] + 7.0;
    logistic[i] = 1.0 / (1.0 + std::exp(-scores[i]));
  }
  EXPECT_NEAR(roc_auc(affine, labels).auc, base, 1e-12);
  EXPECT_NEAR(roc_auc(logistic, labels).auc, base, 1e-12);
  EXPECT_GT(base, 0.5);
}

TEST(Roc, CsvHasOneRowPerPoint) {
  const std::vector<int> labels{0, 1, 0, 1};
  const std::vector<double> scores{0.9, 0.4, 0.6, 0.6};
  const RocCurve c = roc_auc(scores, labels);
  const std::string csv = roc_csv(c);
  EXPECT_EQ(std::size_t(std::count(csv.begin(), csv.end(), '\n')), c.points.size() + 1);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_GE(c.points[i].fpr, c.points[i - 1].fpr);
    EXPECT_GE(c.points[i].tpr, c.points[i - 1].tpr);
  }
}

TEST(Aggregate, ThreeReportedRuns) {
  const double train[3] = {0.9760, 0.9554, 0.9753};
  const double val[3] = {0.9312, 0.9156, 0.9456};
  std::vector<RunHistory> runs(3);
  for (int r = 0; r < 3; ++r) {
    runs[std::size_t(r)].run_id = r;
    runs[std::size_t(r)].epochs = {{1, 0.5, 1.0, 0.5, 1.0}, {20, train[r], 0.1, val[r], 0.2}};
  }
  const RunSummary s = aggregate_runs(runs);
  EXPECT_EQ(s.runs, 3u);
  EXPECT_NEAR(s.mean_train_acc, 0.9689, 1e-12);
  EXPECT_NEAR(s.mean_val_acc, 0.9308, 1e-12);
  EXPECT_EQ(s.min_train_acc, 0.9554);
  EXPECT_EQ(s.max_val_acc, 0.9456);
  const std::string table = render_run_summary(runs, s);
  const auto at = table.find("\nmean,,");
  ASSERT_NE(at, std::string::npos);
  std::istringstream row(table.substr(at + 7));
  double mean_train = 0.0;
  row >> mean_train;
  EXPECT_NEAR(mean_train, 0.9689, 1e-12);
  EXPECT_THROW(aggregate_runs(std::span<const RunHistory>{}), std::invalid_argument);
}

TEST(History, CsvRoundTrip) {
  RunHistory h;
  Rng rng(6);
  for (int e = 1; e <= 20; ++e)
    h.epochs.push_back({e, rng.uniform(), rng.uniform(0, 2), rng.uniform(), rng.uniform(0, 2)});
  const std::string csv = history_csv(h);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,train_acc,train_loss,val_acc,val_loss");
  const RunHistory back = parse_history_csv(csv);
  ASSERT_EQ(back.epochs.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(back.epochs[i].epoch, h.epochs[i].epoch);
    EXPECT_NEAR(back.epochs[i].train_acc, h.epochs[i].train_acc, 1e-6);
    EXPECT_NEAR(back.epochs[i].train_loss, h.epochs[i].train_loss, 1e-6);
    EXPECT_NEAR(back.epochs[i].val_acc, h.epochs[i].val_acc, 1e-6);
    EXPECT_NEAR(back.epochs[i].val_loss, h.epochs[i].val_loss, 1e-6);
  }
}

TEST(History, CurvesExportAndFlatSeries) {
  RunHistory h;
  for (int e = 1; e <= 5; ++e) h.epochs.push_back({e, 0.5, 0.7, 0.5, 0.7});
  const std::string svg = curves_svg(h, true);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 0, true);
  TempDir dir("curves");
  export_curves(h, dir.path());
  for (const char* f : {"history.csv", "accuracy.svg", "loss.svg"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  EXPECT_EQ(read_text_file(dir / "history.csv"), history_csv(h));
}

TEST(Scores, CsvReaderAndArgmax) {
  TempDir dir("scores");
  write_text_file(dir / "s.csv", "label,score0,score1\n0,0.9,0.1\n1,0.2,0.8\n0,0.5,0.5\n");
  const auto rows = read_scores_csv(dir / "s.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].label, 1);
  EXPECT_DOUBLE_EQ(rows[1].score1, 0.8);
  EXPECT_EQ(predicted_class(0.5, 0.5), 0);
  EXPECT_EQ(predicted_class(0.2, 0.8), 1);
  write_text_file(dir / "bad.csv", "0,abc,0.1\n");
  EXPECT_ANY_THROW(read_scores_csv(dir / "bad.csv"));
}
