#pragma once

// Config-driven experiment execution and artifact persistence.
//
// A run directory holds:
//   history.jsonl   one JSON object per epoch, rewritten after every epoch
//   best.ckpt       best-dev parameters
//   vocab.txt       id-ordered vocabulary
//   metrics.json    final metrics of best.ckpt

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sslreg/config.hpp"
#include "sslreg/metrics.hpp"
#include "sslreg/training.hpp"

namespace sslreg {

/// Loads splits, lexicon and stopwords and builds the vocabulary from the
/// training texts.
TrainingData load_training_data(const ExperimentConfig& config);

/// Model dimensions from the config plus the data-dependent sizes.
ModelShape model_shape(const ExperimentConfig& config, const TrainingData& data);

struct RunSummary {
  std::filesystem::path dir;
  std::size_t parameter_count = 0;
  int best_epoch = 0;
  std::optional<MetricSet> train, dev, test;
  std::optional<GapReport> gap;  // needs a test split
};

std::string epoch_json(const EpochRecord& record);
std::string summary_json(const RunSummary& summary, const ExperimentConfig& config);

/// Trains per `config` and writes the artifacts into config.run_dir().
RunSummary run_experiment(const ExperimentConfig& config, std::ostream& log);

struct SweepRow {
  double lambda = 0;
  std::filesystem::path dir;
  std::optional<double> dev_metric;
  std::optional<double> gap;
};

/// One run per lambda with a shared seed, in "<run_name>/lambda_<value>";
/// writes sweep_summary.json next to them. Rejects empty or duplicate lists.
std::vector<SweepRow> sweep(const ExperimentConfig& config, std::span<const double> lambdas, std::ostream& log);

void save_vocab(const std::filesystem::path& path, const Vocab& vocab);
Vocab load_vocab(const std::filesystem::path& path);

/// Metrics of the checkpoint in `run_dir` on a corpus file.
MetricSet evaluate_checkpoint(const std::filesystem::path& run_dir, const std::filesystem::path& corpus);

std::string metrics_json(const MetricSet& m);

/// Shortest round-trip decimal form, e.g. "0.1".
std::string format_number(double value);

}  // namespace sslreg
