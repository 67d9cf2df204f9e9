#include "sslreg/runner.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "sslreg/checkpoint.hpp"
#include "sslreg/error.hpp"
#include "sslreg/io.hpp"

namespace sslreg {
namespace {

using nlohmann::json;

json to_json(const MetricSet& m) {
  return json{{"accuracy", m.accuracy}, {"micro_f1", m.micro_f1}, {"macro_f1", m.macro_f1},
              {"matthews", m.matthews}, {"examples", m.examples}};
}

void check_labels(const std::vector<LabeledExample>& examples, int num_classes, const std::filesystem::path& path) {
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (examples[i].label < 0 || examples[i].label >= num_classes)
      throw ConfigError(path.string() + ": example " + std::to_string(i + 1) + " has label " +
                        std::to_string(examples[i].label) + " outside [0, " + std::to_string(num_classes) + ")");
}

std::vector<LabeledExample> load_optional(const std::filesystem::path& path) {
  if (path.empty()) return {};
  return load_corpus(path);
}

template <class T>
RunSummary run_typed(const ExperimentConfig& config, const TrainingData& data, std::ostream& log) {
  const std::filesystem::path dir = config.run_dir();
  std::filesystem::create_directories(dir);
  const ModelShape shape = model_shape(config, data);
  RunSummary summary;
  summary.dir = dir;
  summary.parameter_count = ModelParams<T>::zeros(shape).parameter_count();
  log << "run " << config.run_name << ": " << regime_name(config.train.regime) << ", lambda "
      << format_number(config.train.lambda) << ", " << summary.parameter_count << " parameters, "
      << data.train.size() << " train examples\n";

  save_vocab(dir / "vocab.txt", data.vocab);
  std::string history;
  const Metric metric = config.train.metric;
  auto on_epoch = [&](const EpochRecord& r) {
    history += epoch_json(r);
    history += '\n';
    write_file_atomic(dir / "history.jsonl", history);
    log << "  " << r.phase << " epoch " << r.epoch << ": loss_c " << r.loss_c << ", loss_p " << r.loss_p;
    if (r.train) log << ", train " << metric_name(metric) << ' ' << r.train->get(metric);
    if (r.dev) log << ", dev " << r.dev->get(metric);
    log << '\n';
  };
  TrainResult<T> result = train<T>(config.train, shape, data, on_epoch);
  write_file_atomic(dir / "history.jsonl", history);
  save_checkpoint(dir / "best.ckpt", result.best);

  summary.best_epoch = result.best_epoch;
  const int threads = evaluation_threads();
  summary.train = evaluate_split(result.best, data.train, data.num_classes, threads);
  if (!data.dev.empty()) summary.dev = evaluate_split(result.best, data.dev, data.num_classes, threads);
  if (!data.test.empty()) {
    summary.test = evaluate_split(result.best, data.test, data.num_classes, threads);
    const double tr = summary.train->get(metric), te = summary.test->get(metric);
    summary.gap = GapReport{tr, te, tr - te};
  }
  write_file_atomic(dir / "metrics.json", summary_json(summary, config));
  return summary;
}

template <class T>
MetricSet evaluate_typed(const std::filesystem::path& run_dir, const std::vector<LabeledExample>& examples) {
  const ModelParams<T> params = load_checkpoint<T>(run_dir / "best.ckpt");
  const Vocab vocab = load_vocab(run_dir / "vocab.txt");
  if (vocab.size() != static_cast<std::size_t>(params.shape.encoder.vocab_size))
    throw CheckpointError("vocab.txt has " + std::to_string(vocab.size()) + " entries but the checkpoint expects " +
                          std::to_string(params.shape.encoder.vocab_size));
  check_labels(examples, params.shape.num_classes, "corpus");
  const EncodedSplit split =
      encode_split(examples, vocab, static_cast<std::size_t>(params.shape.encoder.max_len));
  return evaluate_split(params, split, params.shape.num_classes, evaluation_threads());
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

ModelShape model_shape(const ExperimentConfig& config, const TrainingData& data) {
  ModelShape shape;
  shape.encoder = config.encoder;
  shape.encoder.vocab_size = static_cast<int>(data.vocab.size());
  shape.num_classes = data.num_classes;
  shape.num_ops = static_cast<int>(config.train.active_ops.size());
  return shape;
}

TrainingData load_training_data(const ExperimentConfig& config) {
  config.validate();
  const auto train_examples = load_corpus(config.train_path);
  const auto dev_examples = load_optional(config.dev_path);
  const auto test_examples = load_optional(config.test_path);

  TrainingData data;
  data.num_classes = config.num_classes;
  if (data.num_classes == 0) {
    int max_label = 0;
    for (const auto& e : train_examples) max_label = std::max(max_label, e.label);
    data.num_classes = std::max(2, max_label + 1);
  }
  check_labels(train_examples, data.num_classes, config.train_path);
  check_labels(dev_examples, data.num_classes, config.dev_path);
  check_labels(test_examples, data.num_classes, config.test_path);

  std::vector<Sentence> sentences;
  sentences.reserve(train_examples.size());
  for (const auto& e : train_examples) sentences.push_back(e.sentence);
  data.vocab = Vocab::build(sentences, config.min_freq);
  data.max_len = static_cast<std::size_t>(config.encoder.max_len);
  data.train = encode_split(train_examples, data.vocab, data.max_len);
  data.dev = encode_split(dev_examples, data.vocab, data.max_len);
  data.test = encode_split(test_examples, data.vocab, data.max_len);
  if (!config.lexicon_path.empty()) data.lexicon = load_lexicon(config.lexicon_path);
  data.stopwords =
      load_stopwords(config.stopwords_path.empty() ? default_stopwords_path() : config.stopwords_path);
  return data;
}

std::string epoch_json(const EpochRecord& r) {
  json j{{"epoch", r.epoch}, {"phase", r.phase}, {"lr", r.lr},
         {"loss_c", r.loss_c}, {"loss_p", r.loss_p}, {"lambda", r.lambda}};
  if (r.train) j["train"] = to_json(*r.train);
  if (r.dev) j["dev"] = to_json(*r.dev);
  if (r.test) j["test"] = to_json(*r.test);
  return j.dump();
}

std::string metrics_json(const MetricSet& m) { return to_json(m).dump(2); }

std::string summary_json(const RunSummary& s, const ExperimentConfig& config) {
  json j{{"run_name", config.run_name},
         {"regime", regime_name(config.train.regime)},
         {"lambda", config.train.lambda},
         {"seed", config.train.seed},
         {"precision", config.precision},
         {"metric", metric_name(config.train.metric)},
         {"parameter_count", s.parameter_count},
         {"best_epoch", s.best_epoch}};
  if (s.train) j["train"] = to_json(*s.train);
  if (s.dev) j["dev"] = to_json(*s.dev);
  if (s.test) j["test"] = to_json(*s.test);
  if (s.gap) j["gap"] = json{{"train", s.gap->train}, {"test", s.gap->test}, {"difference", s.gap->difference}};
  return j.dump(2) + "\n";
}

RunSummary run_experiment(const ExperimentConfig& config, std::ostream& log) {
  const TrainingData data = load_training_data(config);
  if (config.precision == 64) return run_typed<double>(config, data, log);
  return run_typed<float>(config, data, log);
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, std::span<const double> lambdas, std::ostream& log) {
  if (lambdas.empty()) throw ConfigError("sweep: lambda list is empty");
  std::set<double> seen;
  for (double l : lambdas) {
    if (!(l >= 0)) throw ConfigError("sweep: lambda must be >= 0, got " + format_number(l));
    if (!seen.insert(l).second) throw ConfigError("sweep: duplicate lambda " + format_number(l));
  }
  const TrainingData data = load_training_data(config);
  const Metric metric = config.train.metric;
  std::vector<SweepRow> rows;
  json table = json::array();
  for (double l : lambdas) {
    ExperimentConfig run = config;
    run.train.lambda = l;
    run.output_dir = config.run_dir();
    run.run_name = "lambda_" + format_number(l);
    run.validate();
    const RunSummary s =
        config.precision == 64 ? run_typed<double>(run, data, log) : run_typed<float>(run, data, log);
    SweepRow row{l, s.dir, std::nullopt, std::nullopt};
    json entry{{"lambda", l}, {"dir", s.dir.filename().string()}};
    if (s.dev) {
      row.dev_metric = s.dev->get(metric);
      entry["dev_" + std::string(metric_name(metric))] = *row.dev_metric;
    }
    if (s.gap) {
      row.gap = s.gap->difference;
      entry["train_test_gap"] = *row.gap;
    }
    table.push_back(entry);
    rows.push_back(std::move(row));
  }
  write_file_atomic(config.run_dir() / "sweep_summary.json",
                    json{{"metric", metric_name(metric)}, {"rows", table}}.dump(2) + "\n");
  return rows;
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::string out;
  for (const auto& t : vocab.tokens()) {
    out += t;
    out += '\n';
  }
  write_file_atomic(path, out);
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::istringstream in(read_file_binary(path));
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocab::from_tokens(std::move(tokens));
}

MetricSet evaluate_checkpoint(const std::filesystem::path& run_dir, const std::filesystem::path& corpus) {
  const auto examples = load_corpus(corpus);
  if (examples.empty()) throw ConfigError(corpus.string() + ": no examples");
  const CheckpointHeader header = read_checkpoint_header(run_dir / "best.ckpt");
  if (header.value_bytes == 8) return evaluate_typed<double>(run_dir, examples);
  return evaluate_typed<float>(run_dir, examples);
}

}  // namespace sslreg
