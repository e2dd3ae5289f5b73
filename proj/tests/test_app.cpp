#include "mpox/app.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace mpox;
namespace fs = std::filesystem;
using mpox::testing::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class AppTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus_ = new TempDir("app_corpus");
    generate_synthetic(corpus_->path(), {40, 24, 5});
  }
  static void TearDownTestSuite() { delete corpus_; }

  static RunConfig tiny(const fs::path& out) {
    RunConfig c;
    c.data_root = corpus_->path().string();
    c.seed = 3;
    c.epochs = 1;
    c.batch_size = 8;
    c.limit = 64;
    c.set_image_size(16);
    c.model.conv_filters = {4, 8};
    c.model.pool_after_block = {true, true};
    c.model.dense_widths = {8};
    c.output_dir = out.string();
    return c;
  }

  static TempDir* corpus_;
};
TempDir* AppTest::corpus_ = nullptr;

}  // namespace

TEST(RunConfigJson, DefaultsAndRoundTrip) {
  RunConfig c;
  EXPECT_EQ(c.epochs, 20);
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.split_ratio, 0.9);
  EXPECT_EQ(c.optimizer.lr, 1e-3);
  EXPECT_EQ(c.image_size(), 224);

  c.data_root = "/data/msld";
  c.seed = 1234;
  c.epochs = 7;
  c.optimizer.beta2 = 0.995;
  c.model = ModelConfig::paper_figure();
  c.model.dropout_rate = 0.3;
  c.augment.zoom_lo = 0.95;
  c.limit = 100;
  c.runs = 3;
  const nlohmann::json j = run_config_to_json(c);
  const RunConfig back = run_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(run_config_to_json(back), j);
  EXPECT_EQ(back.model.pool_after_block, c.model.pool_after_block);
  EXPECT_EQ(back.augment.zoom_lo, 0.95);
}

TEST(RunConfigJson, PresetAppliedBeforeExplicitKeys) {
  const auto j = nlohmann::json::parse(R"({"preset": "paper-figure", "dropout": 0.25, "image_size": 96})");
  const RunConfig c = run_config_from_json(j);
  EXPECT_EQ(preset_name(ModelConfig::paper_figure()), "paper-figure");
  EXPECT_FALSE(c.model.pool_after_block.back());
  EXPECT_EQ(c.model.dropout_rate, 0.25);
  EXPECT_EQ(c.image_size(), 96);
}

TEST(RunConfigJson, InvalidValuesRejected) {
  RunConfig c;
  c.split_ratio = 1.5;
  EXPECT_THROW(c.validate(), AppError);
  RunConfig e;
  e.epochs = 0;
  EXPECT_THROW(e.validate(), AppError);
}

TEST_F(AppTest, SingleEpochSmoke) {
  TempDir out("app_smoke");
  std::ostringstream log;
  const TrainOutcome o = cmd_train(tiny(out.path()), log);
  ASSERT_EQ(o.runs.size(), 1u);
  EXPECT_EQ(o.runs[0].history.epochs.size(), 1u);
  const fs::path run = out / "run_0";
  for (const char* f : {"split.json", "best.mpxt", "final.mpxt", "history.csv", "accuracy.svg", "loss.svg",
                        "report.txt", "confusion.csv", "summary.txt"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  EXPECT_TRUE(fs::exists(out / "config.json"));
  EXPECT_TRUE(fs::exists(out / "aggregate.csv"));
  const RunConfig echoed = run_config_from_json(nlohmann::json::parse(slurp(out / "config.json")));
  EXPECT_EQ(run_config_to_json(echoed), run_config_to_json(tiny(out.path())));
  const auto split = nlohmann::json::parse(slurp(run / "split.json"));
  EXPECT_EQ(split["train"].size() + split["test"].size(), 64u);
}

TEST_F(AppTest, MultipleRunsAggregate) {
  TempDir out("app_runs");
  RunConfig c = tiny(out.path());
  c.runs = 3;
  std::ostringstream log;
  const TrainOutcome o = cmd_train(c, log);
  ASSERT_EQ(o.runs.size(), 3u);
  for (int r = 0; r < 3; ++r) {
    EXPECT_TRUE(fs::exists(out / ("run_" + std::to_string(r)) / "history.csv"));
    EXPECT_EQ(o.runs[std::size_t(r)].history.seed, 3u + std::uint64_t(r));
  }
  EXPECT_EQ(o.summary.runs, 3u);
  double mean = 0.0;
  for (const auto& run : o.runs) mean += run.history.epochs.back().train_acc / 3.0;
  EXPECT_NEAR(o.summary.mean_train_acc, mean, 1e-12);
  const std::string agg = slurp(out / "aggregate.csv");
  EXPECT_NE(agg.find("\nmean,,"), std::string::npos);
}

TEST_F(AppTest, EvaluateReproducesTrainingReport) {
  TempDir out("app_eval");
  std::ostringstream log;
  cmd_train(tiny(out.path()), log);
  const fs::path run = out / "run_0";
  std::ostringstream a, b;
  const EvalReport first = cmd_evaluate({run / "final.mpxt", "", false, out / "eval_a"}, a);
  const EvalReport second = cmd_evaluate({run / "final.mpxt", "", false, out / "eval_b"}, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(first.cm, second.cm);
  EXPECT_EQ(slurp(out / "eval_a" / "report.txt"), slurp(run / "report.txt"));
  EXPECT_EQ(slurp(out / "eval_a" / "summary.txt"), slurp(run / "summary.txt"));
  EXPECT_EQ(first.cm.total(), 7);  // 64 - floor(0.9 * 64)

  const EvalReport all = cmd_evaluate({run / "final.mpxt", "", true, {}}, a);
  EXPECT_EQ(all.cm.total(), 80);
}

TEST_F(AppTest, EvaluateRejectsClassMismatch) {
  TempDir out("app_mismatch");
  std::ostringstream log;
  cmd_train(tiny(out.path()), log);
  TempDir other("app_other");
  generate_synthetic(other.path(), {3, 16, 1});
  fs::rename(other / "Non_Monkeypox", other / "Other");
  EXPECT_THROW(cmd_evaluate({out / "run_0" / "final.mpxt", other.path().string(), true, {}}, log), AppError);
}

TEST(EvaluateScores, ReportedOutcomeRows) {
  TempDir dir("app_scores");
  std::string csv = "label,score0,score1\n";
  auto rows = [&](int label, bool predicted_positive, int n) {
    for (int i = 0; i < n; ++i) csv += std::to_string(label) + (predicted_positive ? ",0.8,0.2\n" : ",0.3,0.7\n");
  };
  rows(0, true, 152);
  rows(0, false, 10);
  rows(1, true, 9);
  rows(1, false, 149);
  write_text_file(dir / "scores.csv", csv);
  std::ostringstream log;
  const EvalReport r = cmd_evaluate_scores(dir / "scores.csv", dir / "out", log);
  EXPECT_EQ(r.cm, (ConfusionMatrix{152, 10, 9, 149}));
  const std::string report = slurp(dir / "out" / "report.txt");
  for (const char* cls : {"Monkeypox", "Non_Monkeypox"}) {
    const auto at = report.find(cls);
    ASSERT_NE(at, std::string::npos) << report;
    const std::string line = report.substr(at, report.find('\n', at) - at);
    std::size_t hits = 0;
    for (std::size_t p = line.find("0.94"); p != std::string::npos; p = line.find("0.94", p + 1)) ++hits;
    EXPECT_EQ(hits, 3u) << line;
  }
  write_text_file(dir / "empty.csv", "label,score0,score1\n");
  EXPECT_THROW(cmd_evaluate_scores(dir / "empty.csv", {}, log), AppError);
}

TEST_F(AppTest, PredictZeroOutputLayerAndRepeatability) {
  TempDir out("app_predict");
  std::ostringstream log;
  cmd_train(tiny(out.path()), log);
  CheckpointData data = load_checkpoint(out / "run_0" / "final.mpxt");
  for (auto& t : data.tensors)
    if (t.name.rfind("dense_out/", 0) == 0) t.tensor.fill(0.0f);
  save_checkpoint(out / "zero.mpxt", data);

  const fs::path image = corpus_->path() / "Monkeypox" / "blob_00000.png";
  std::ostringstream zero;
  const auto z = cmd_predict(out / "zero.mpxt", {image}, zero);
  ASSERT_EQ(z.size(), 1u);
  EXPECT_EQ(z[0].score0, 0.5);
  EXPECT_EQ(z[0].score1, 0.5);
  EXPECT_EQ(z[0].label, 0);

  std::ostringstream twice;
  std::ofstream(out / "junk.png") << "nope";
  const auto p = cmd_predict(out / "run_0" / "final.mpxt", {image, out / "junk.png", image}, twice);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_FALSE(p[1].error.empty());
  std::istringstream lines(twice.str());
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(header, "file,label,score0,score1");
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.rfind(image.string() + ",", 0), 0u);
}

TEST(Summary, RowsAndTotals) {
  const std::string text = cmd_summary(RunConfig{}, {{"vgg16", 138357544}});
  EXPECT_NE(text.find("pre-flatten shape: 3x3x512"), std::string::npos);
  // conv 1572768 + bn2d 4032 + dense 1221186 + bn1d 1792, summed by hand.
  EXPECT_NE(text.find("total params: 2799778"), std::string::npos);
  EXPECT_NE(text.find("vgg16"), std::string::npos);
  RunConfig figure;
  figure.model = ModelConfig::paper_figure();
  EXPECT_NE(cmd_summary(figure).find("pre-flatten shape: 7x7x512"), std::string::npos);
}

TEST_F(AppTest, IdenticalRunsInDifferentDirectoriesMatchBytewise) {
  TempDir a("app_det_a"), b("app_det_b");
  std::ostringstream log;
  cmd_train(tiny(a.path()), log);
  cmd_train(tiny(b.path()), log);
  for (const char* f : {"final.mpxt", "best.mpxt", "history.csv", "report.csv"})
    EXPECT_EQ(slurp(a / "run_0" / f), slurp(b / "run_0" / f)) << f;
}
