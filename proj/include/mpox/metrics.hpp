#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpox {

/// Binary confusion counts. `positive` is the label treated as the positive
/// class (Monkeypox = 0 by default).
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fn + fp + tn; }
  /// Same outcomes seen from the other class.
  ConfusionMatrix swapped() const { return {tn, fp, fn, tp}; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          int positive = 0);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  // Set when the corresponding denominator was zero and the value forced to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct ClassificationReport {
  ClassMetrics per_class[2];  // [0] = positive class, [1] = the other
  ClassMetrics macro;
  double accuracy = 0.0;
  std::int64_t total = 0;

  bool degenerate() const;
};

/// Precision/recall/F1 for both classes plus macro averages and accuracy.
/// Zero denominators yield 0 with the matching flag set.
ClassificationReport report(const ConfusionMatrix& cm);

/// Plain-text table, values rounded to two decimals.
std::string render_report(const ClassificationReport& r, const std::vector<std::string>& names);
std::string report_csv(const ClassificationReport& r, const std::vector<std::string>& names);
std::string render_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& names);
std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // starts at (0, 0), ends at (1, 1)
  double auc = 0.0;
};

/// Threshold sweep over descending unique scores (ties form one step), AUC by
/// the trapezoidal rule. `labels[i] == positive` marks a positive sample.
/// Throws std::invalid_argument unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels, int positive = 0);

std::string roc_csv(const RocCurve& roc);

struct EpochRecord {
  int epoch = 0;
  double train_acc = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double val_loss = 0.0;
};

struct RunHistory {
  int run_id = 0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
};

struct RunSummary {
  std::size_t runs = 0;
  double mean_train_acc = 0.0, min_train_acc = 0.0, max_train_acc = 0.0;
  double mean_val_acc = 0.0, min_val_acc = 0.0, max_val_acc = 0.0;
};

/// Mean/min/max of each run's final-epoch accuracies.
RunSummary aggregate_runs(std::span<const RunHistory> histories);
std::string render_run_summary(std::span<const RunHistory> histories, const RunSummary& s);

/// CSV: epoch,train_acc,train_loss,val_acc,val_loss
std::string history_csv(const RunHistory& history);
RunHistory parse_history_csv(const std::string& text);

/// Accuracy and loss charts, each with train and validation polylines.
std::string curves_svg(const RunHistory& history, bool accuracy);

/// Writes `<dir>/history.csv`, `<dir>/accuracy.svg`, `<dir>/loss.svg`.
void export_curves(const RunHistory& history, const std::filesystem::path& dir);

struct ScoreRow {
  int label = 0;
  double score0 = 0.0;
  double score1 = 0.0;
};

/// Reads `label,score0,score1` rows (header optional).
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

/// Argmax over two scores; ties go to class 0.
inline int predicted_class(double score0, double score1) { return score1 > score0 ? 1 : 0; }

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mpox
