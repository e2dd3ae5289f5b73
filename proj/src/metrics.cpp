#include "mpox/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mpox {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Round-trip precision for CSV payloads.
std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  m.support = cm.tp + cm.fn;
  if (cm.tp + cm.fp > 0) m.precision = double(cm.tp) / double(cm.tp + cm.fp);
  else m.precision_undefined = true;
  if (cm.tp + cm.fn > 0) m.recall = double(cm.tp) / double(cm.tp + cm.fn);
  else m.recall_undefined = true;
  if (m.precision + m.recall > 0.0) m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else m.f1_undefined = true;
  return m;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions,
                          int positive) {
  if (labels.size() != predictions.size())
    throw std::invalid_argument("confusion: " + std::to_string(labels.size()) + " labels vs " +
                                std::to_string(predictions.size()) + " predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == positive;
    const bool predicted = predictions[i] == positive;
    if (actual && predicted) ++cm.tp;
    else if (actual) ++cm.fn;
    else if (predicted) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

bool ClassificationReport::degenerate() const {
  for (const auto& c : per_class)
    if (c.precision_undefined || c.recall_undefined || c.f1_undefined) return true;
  return false;
}

ClassificationReport report(const ConfusionMatrix& cm) {
  ClassificationReport r;
  r.total = cm.total();
  r.per_class[0] = class_metrics(cm);
  r.per_class[1] = class_metrics(cm.swapped());
  r.macro.precision = (r.per_class[0].precision + r.per_class[1].precision) / 2.0;
  r.macro.recall = (r.per_class[0].recall + r.per_class[1].recall) / 2.0;
  r.macro.f1 = (r.per_class[0].f1 + r.per_class[1].f1) / 2.0;
  r.macro.support = r.total;
  if (r.total > 0) r.accuracy = double(cm.tp + cm.tn) / double(r.total);
  return r;
}

std::string render_report(const ClassificationReport& r, const std::vector<std::string>& names) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s\n", "", "precision", "recall",
                "f1-score", "support");
  os << line;
  for (int c = 0; c < 2; ++c) {
    const auto& m = r.per_class[c];
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10lld%s\n", names.at(std::size_t(c)).c_str(),
                  fixed(m.precision, 2).c_str(), fixed(m.recall, 2).c_str(), fixed(m.f1, 2).c_str(),
                  static_cast<long long>(m.support),
                  (m.precision_undefined || m.recall_undefined || m.f1_undefined) ? "  (undefined)" : "");
    os << line;
  }
  os << '\n';
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10lld\n", "accuracy", "", "",
                fixed(r.accuracy, 2).c_str(), static_cast<long long>(r.total));
  os << line;
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10lld\n", "macro avg",
                fixed(r.macro.precision, 2).c_str(), fixed(r.macro.recall, 2).c_str(),
                fixed(r.macro.f1, 2).c_str(), static_cast<long long>(r.total));
  os << line;
  return os.str();
}

std::string report_csv(const ClassificationReport& r, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "class,precision,recall,f1,support\n";
  for (int c = 0; c < 2; ++c) {
    const auto& m = r.per_class[c];
    os << names.at(std::size_t(c)) << ',' << exact(m.precision) << ',' << exact(m.recall) << ','
       << exact(m.f1) << ',' << m.support << '\n';
  }
  os << "macro avg," << exact(r.macro.precision) << ',' << exact(r.macro.recall) << ','
     << exact(r.macro.f1) << ',' << r.total << '\n';
  os << "accuracy,,," << exact(r.accuracy) << ',' << r.total << '\n';
  return os.str();
}

std::string render_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %16s %16s\n", "actual \\ predicted",
                names.at(0).c_str(), names.at(1).c_str());
  os << line;
  std::snprintf(line, sizeof line, "%-22s %16lld %16lld\n", names.at(0).c_str(),
                static_cast<long long>(cm.tp), static_cast<long long>(cm.fn));
  os << line;
  std::snprintf(line, sizeof line, "%-22s %16lld %16lld\n", names.at(1).c_str(),
                static_cast<long long>(cm.fp), static_cast<long long>(cm.tn));
  os << line;
  os << "tp=" << cm.tp << " fn=" << cm.fn << " fp=" << cm.fp << " tn=" << cm.tn << '\n';
  return os.str();
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "actual," << names.at(0) << ',' << names.at(1) << '\n';
  os << names.at(0) << ',' << cm.tp << ',' << cm.fn << '\n';
  os << names.at(1) << ',' << cm.fp << ',' << cm.tn << '\n';
  return os.str();
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels, int positive) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: scores and labels differ in length");
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("roc_auc: non-finite score");
    (labels[i] == positive ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::int64_t tp = 0, fp = 0;
  // Twice the Mann-Whitney count, kept in integers until the final divide.
  double twice_area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    std::int64_t dtp = 0, dfp = 0;
    for (; i < order.size() && scores[order[i]] == threshold; ++i)
      (labels[order[i]] == positive ? dtp : dfp) += 1;
    twice_area += double(dfp) * double(2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({threshold, double(fp) / double(neg), double(tp) / double(pos)});
  }
  roc.auc = twice_area / (2.0 * double(pos) * double(neg));
  return roc;
}

std::string roc_csv(const RocCurve& roc) {
  std::ostringstream os;
  os << "threshold,fpr,tpr\n";
  for (const auto& p : roc.points)
    os << (std::isinf(p.threshold) ? std::string("inf") : exact(p.threshold)) << ','
       << exact(p.fpr) << ',' << exact(p.tpr) << '\n';
  return os.str();
}

RunSummary aggregate_runs(std::span<const RunHistory> histories) {
  if (histories.empty()) throw std::invalid_argument("aggregate_runs needs at least one run");
  RunSummary s;
  s.runs = histories.size();
  s.min_train_acc = s.min_val_acc = std::numeric_limits<double>::infinity();
  s.max_train_acc = s.max_val_acc = -std::numeric_limits<double>::infinity();
  for (const auto& h : histories) {
    if (h.epochs.empty()) throw std::invalid_argument("aggregate_runs: run has no epochs");
    const auto& last = h.epochs.back();
    s.mean_train_acc += last.train_acc;
    s.mean_val_acc += last.val_acc;
    s.min_train_acc = std::min(s.min_train_acc, last.train_acc);
    s.max_train_acc = std::max(s.max_train_acc, last.train_acc);
    s.min_val_acc = std::min(s.min_val_acc, last.val_acc);
    s.max_val_acc = std::max(s.max_val_acc, last.val_acc);
  }
  s.mean_train_acc /= double(s.runs);
  s.mean_val_acc /= double(s.runs);
  return s;
}

std::string render_run_summary(std::span<const RunHistory> histories, const RunSummary& s) {
  std::ostringstream os;
  os << "run,seed,final_train_acc,final_val_acc\n";
  for (const auto& h : histories)
    os << h.run_id << ',' << h.seed << ',' << exact(h.epochs.back().train_acc) << ','
       << exact(h.epochs.back().val_acc) << '\n';
  os << "mean,," << exact(s.mean_train_acc) << ',' << exact(s.mean_val_acc) << '\n';
  os << "min,," << exact(s.min_train_acc) << ',' << exact(s.min_val_acc) << '\n';
  os << "max,," << exact(s.max_train_acc) << ',' << exact(s.max_val_acc) << '\n';
  return os.str();
}

std::string history_csv(const RunHistory& history) {
  std::ostringstream os;
  os << "epoch,train_acc,train_loss,val_acc,val_loss\n";
  for (const auto& e : history.epochs)
    os << e.epoch << ',' << exact(e.train_acc) << ',' << exact(e.train_loss) << ','
       << exact(e.val_acc) << ',' << exact(e.val_loss) << '\n';
  return os.str();
}

RunHistory parse_history_csv(const std::string& text) {
  RunHistory h;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,", 0) != 0)
    throw std::invalid_argument("history CSV lacks the expected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord e;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &e.epoch, &e.train_acc, &e.train_loss,
                    &e.val_acc, &e.val_loss) != 5)
      throw std::invalid_argument("malformed history row: " + line);
    h.epochs.push_back(e);
  }
  return h;
}

std::string curves_svg(const RunHistory& history, bool accuracy) {
  constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  std::vector<double> train, val;
  for (const auto& e : history.epochs) {
    train.push_back(accuracy ? e.train_acc : e.train_loss);
    val.push_back(accuracy ? e.val_acc : e.val_loss);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : train) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : val) lo = std::min(lo, v), hi = std::max(hi, v);
  const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(0.05, 0.05 * std::abs(hi));
  lo -= pad;
  hi += pad;
  const std::size_t n = train.size();
  auto px = [&](std::size_t i) {
    return kLeft + (n > 1 ? double(i) / double(n - 1) : 0.5) * (kW - kLeft - kRight);
  };
  auto py = [&](double v) { return kTop + (hi - v) / (hi - lo) * (kH - kTop - kBottom); };
  auto polyline = [&](const std::vector<double>& ys, const char* color) {
    std::ostringstream os;
    os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i)
      os << (i ? " " : "") << fixed(px(i), 2) << ',' << fixed(py(ys[i]), 2);
    os << "\"/>\n";
    return os.str();
  };
  const char* title = accuracy ? "Accuracy" : "Loss";
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "  <text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << title << "</text>\n";
  os << "  <line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
     << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "  <line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "  <text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
     << fixed(hi, 3) << "</text>\n";
  os << "  <text x=\"" << kLeft - 6 << "\" y=\"" << kH - kBottom << "\" text-anchor=\"end\" font-size=\"11\">"
     << fixed(lo, 3) << "</text>\n";
  os << "  <text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">epoch (1.."
     << n << ")</text>\n";
  os << polyline(train, "#1f77b4") << polyline(val, "#ff7f0e");
  os << "  <text x=\"" << kW - kRight - 120 << "\" y=\"" << kTop + 14
     << "\" font-size=\"12\" fill=\"#1f77b4\">train</text>\n";
  os << "  <text x=\"" << kW - kRight - 120 << "\" y=\"" << kTop + 30
     << "\" font-size=\"12\" fill=\"#ff7f0e\">validation</text>\n";
  os << "</svg>\n";
  return os.str();
}

void export_curves(const RunHistory& history, const std::filesystem::path& dir) {
  if (history.epochs.empty()) throw std::invalid_argument("export_curves: empty history");
  std::filesystem::create_directories(dir);
  write_text_file(dir / "history.csv", history_csv(history));
  write_text_file(dir / "accuracy.svg", curves_svg(history, true));
  write_text_file(dir / "loss.svg", curves_svg(history, false));
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<ScoreRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ScoreRow r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &r.label, &r.score0, &r.score1) != 3) {
      if (rows.empty() && line.rfind("label", 0) == 0) continue;
      throw std::invalid_argument("malformed score row: " + line);
    }
    if (r.label != 0 && r.label != 1)
      throw std::invalid_argument("score row label must be 0 or 1: " + line);
    rows.push_back(r);
  }
  return rows;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace mpox
