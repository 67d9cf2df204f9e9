#include "sslreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sslreg/error.hpp"

namespace sslreg {

ConfusionCounts ConfusionCounts::from(std::span<const int> gold, std::span<const int> pred, int num_classes) {
  if (gold.size() != pred.size()) throw Error("metrics: gold and prediction lengths differ");
  if (gold.empty()) throw Error("metrics: no examples");
  if (num_classes < 1) throw Error("metrics: num_classes must be positive");
  ConfusionCounts c;
  c.num_classes = num_classes;
  c.matrix.assign(static_cast<std::size_t>(num_classes), std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
      throw Error("metrics: label outside [0, " + std::to_string(num_classes) + ")");
    ++c.matrix[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])];
  }
  return c;
}

long ConfusionCounts::total() const {
  long n = 0;
  for (const auto& row : matrix)
    for (long v : row) n += v;
  return n;
}

long ConfusionCounts::correct() const {
  long n = 0;
  for (std::size_t k = 0; k < matrix.size(); ++k) n += matrix[k][k];
  return n;
}

long ConfusionCounts::true_positives(int c) const {
  return matrix[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
}

long ConfusionCounts::false_positives(int c) const {
  long n = 0;
  for (std::size_t g = 0; g < matrix.size(); ++g)
    if (g != static_cast<std::size_t>(c)) n += matrix[g][static_cast<std::size_t>(c)];
  return n;
}

long ConfusionCounts::false_negatives(int c) const {
  long n = 0;
  const auto& row = matrix[static_cast<std::size_t>(c)];
  for (std::size_t p = 0; p < row.size(); ++p)
    if (p != static_cast<std::size_t>(c)) n += row[p];
  return n;
}

namespace {

double f1(long tp, long fp, long fn) {
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void require_examples(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error("metrics: no examples");
}

}  // namespace

double accuracy(const ConfusionCounts& c) {
  require_examples(c);
  return static_cast<double>(c.correct()) / static_cast<double>(c.total());
}

double micro_f1(const ConfusionCounts& c) {
  require_examples(c);
  long tp = 0, fp = 0, fn = 0;
  for (int k = 0; k < c.num_classes; ++k) {
    tp += c.true_positives(k);
    fp += c.false_positives(k);
    fn += c.false_negatives(k);
  }
  return f1(tp, fp, fn);
}

double macro_f1(const ConfusionCounts& c) {
  require_examples(c);
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < c.num_classes; ++k) {
    const long tp = c.true_positives(k), fp = c.false_positives(k), fn = c.false_negatives(k);
    if (tp + fp + fn == 0) continue;
    sum += f1(tp, fp, fn);
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

double matthews_corr(const ConfusionCounts& c) {
  require_examples(c);
  const auto k = static_cast<std::size_t>(c.num_classes);
  const double s = static_cast<double>(c.total());
  const double correct = static_cast<double>(c.correct());
  double sum_pt = 0.0, sum_p2 = 0.0, sum_t2 = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double t = 0.0, p = 0.0;  // gold and predicted totals for class j
    for (std::size_t i = 0; i < k; ++i) {
      t += static_cast<double>(c.matrix[j][i]);
      p += static_cast<double>(c.matrix[i][j]);
    }
    sum_pt += p * t;
    sum_p2 += p * p;
    sum_t2 += t * t;
  }
  const double denom = std::sqrt((s * s - sum_p2) * (s * s - sum_t2));
  if (denom == 0.0) return 0.0;
  return (correct * s - sum_pt) / denom;
}

double matthews_corr(std::span<const int> gold, std::span<const int> pred) {
  int classes = 0;
  for (int g : gold) classes = std::max(classes, g + 1);
  for (int p : pred) classes = std::max(classes, p + 1);
  return matthews_corr(ConfusionCounts::from(gold, pred, std::max(classes, 1)));
}

Metric parse_metric(const std::string& name) {
  if (name == "accuracy") return Metric::kAccuracy;
  if (name == "micro_f1") return Metric::kMicroF1;
  if (name == "macro_f1") return Metric::kMacroF1;
  if (name == "matthews" || name == "mcc") return Metric::kMatthews;
  throw Error("unknown metric '" + name + "' (expected accuracy, micro_f1, macro_f1, matthews)");
}

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kAccuracy: return "accuracy";
    case Metric::kMicroF1: return "micro_f1";
    case Metric::kMacroF1: return "macro_f1";
    case Metric::kMatthews: return "matthews";
  }
  return "?";
}

double compute_metric(Metric m, const ConfusionCounts& c) {
  switch (m) {
    case Metric::kAccuracy: return accuracy(c);
    case Metric::kMicroF1: return micro_f1(c);
    case Metric::kMacroF1: return macro_f1(c);
    case Metric::kMatthews: return matthews_corr(c);
  }
  return 0.0;
}

double MetricSet::get(Metric m) const {
  switch (m) {
    case Metric::kAccuracy: return accuracy;
    case Metric::kMicroF1: return micro_f1;
    case Metric::kMacroF1: return macro_f1;
    case Metric::kMatthews: return matthews;
  }
  return 0.0;
}

MetricSet all_metrics(const ConfusionCounts& c) {
  return {accuracy(c), micro_f1(c), macro_f1(c), matthews_corr(c), c.total()};
}

}  // namespace sslreg
