#pragma once

#include <span>
#include <string>
#include <vector>

namespace sslreg {

/// Full confusion matrix; `matrix[gold][pred]`.
struct ConfusionCounts {
  int num_classes = 0;
  std::vector<std::vector<long>> matrix;

  static ConfusionCounts from(std::span<const int> gold, std::span<const int> pred, int num_classes);

  long total() const;
  long correct() const;
  long true_positives(int c) const;
  long false_positives(int c) const;
  long false_negatives(int c) const;
};

double accuracy(const ConfusionCounts& counts);
/// Pooled TP/FP/FN over all classes.
double micro_f1(const ConfusionCounts& counts);
/// Mean per-class F1 over classes that occur in gold or predictions; a class
/// with a zero denominator scores 0.
double macro_f1(const ConfusionCounts& counts);
/// Multiclass (Gorodkin) form; 0 when the denominator vanishes.
double matthews_corr(const ConfusionCounts& counts);
double matthews_corr(std::span<const int> gold, std::span<const int> pred);

enum class Metric { kAccuracy, kMicroF1, kMacroF1, kMatthews };

Metric parse_metric(const std::string& name);
const char* metric_name(Metric m);
double compute_metric(Metric m, const ConfusionCounts& counts);

struct MetricSet {
  double accuracy = 0, micro_f1 = 0, macro_f1 = 0, matthews = 0;
  long examples = 0;
  double get(Metric m) const;
  bool operator==(const MetricSet&) const = default;
};

MetricSet all_metrics(const ConfusionCounts& counts);

struct GapReport {
  double train = 0;
  double test = 0;
  double difference = 0;  // train - test
};

}  // namespace sslreg
