// Command-line front end: gen, train, evaluate, augment, mask, sweep, gradcheck.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sslreg/augment.hpp"
#include "sslreg/config.hpp"
#include "sslreg/diagnostics.hpp"
#include "sslreg/error.hpp"
#include "sslreg/io.hpp"
#include "sslreg/kernels.hpp"
#include "sslreg/masking.hpp"
#include "sslreg/runner.hpp"
#include "sslreg/synthetic.hpp"

using namespace sslreg;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> precision;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--out", o.out, "Override the output directory");
  cmd->add_option("--precision", o.precision, "Floating-point width")->check(CLI::IsMember({32, 64}));
}

ExperimentConfig load_with(const std::string& path, const Overrides& o) {
  ExperimentConfig c = load_config(path);
  if (o.seed) c.train.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.precision) c.precision = *o.precision;
  c.validate();
  return c;
}

std::vector<LabeledExample> read_input(const std::string& path) {
  auto examples = load_corpus(path);
  if (examples.empty()) throw ConfigError(path + ": no examples");
  return examples;
}

int cmd_gen(int n, int dev, int test, int classes, int vocab, double noise, std::uint64_t seed,
            const std::string& out) {
  SyntheticSpec spec;
  spec.num_classes = classes;
  spec.vocab_size = vocab;
  spec.noise = noise;
  spec.seed = seed;
  const SyntheticTask task(spec);
  Rng rng = make_rng(seed, Stream::kBatchOrder);
  const std::filesystem::path dir(out);
  write_file_atomic(dir / "train.tsv", format_corpus(task.sample(static_cast<std::size_t>(n), rng)));
  if (dev > 0) write_file_atomic(dir / "dev.tsv", format_corpus(task.sample(static_cast<std::size_t>(dev), rng)));
  if (test > 0)
    write_file_atomic(dir / "test.tsv", format_corpus(task.sample(static_cast<std::size_t>(test), rng)));
  write_file_atomic(dir / "lexicon.txt", format_lexicon(task.synsets()));
  std::cout << "wrote " << n << " train";
  if (dev > 0) std::cout << ", " << dev << " dev";
  if (test > 0) std::cout << ", " << test << " test";
  std::cout << " examples and " << task.synsets().size() << " synsets to " << dir.string() << '\n';
  return 0;
}

int cmd_augment(const std::string& input, const std::string& lexicon_path, const std::string& stopwords_path,
                const std::string& op_name, const std::vector<std::string>& op_names, double rate,
                std::uint64_t seed, bool stats) {
  const auto examples = read_input(input);
  const SynonymLexicon lexicon = lexicon_path.empty() ? SynonymLexicon() : load_lexicon(lexicon_path);
  const StopwordSet stopwords = load_stopwords(stopwords_path.empty() ? default_stopwords_path() : std::filesystem::path(stopwords_path));
  const AugmentationDeps deps{lexicon, stopwords, rate};
  Rng rng = make_rng(seed, Stream::kCorruption);

  std::vector<AugOp> ops;
  for (const auto& name : op_names) ops.push_back(parse_aug_op(name));
  const AugOpSet active = ops.empty() ? AugOpSet() : AugOpSet(ops);
  std::map<std::string, long> counts;
  long skipped = 0;
  double len_before = 0, len_after = 0;
  for (const auto& ex : examples) {
    Sentence result;
    std::string applied;
    if (!op_name.empty()) {
      const AugOp op = parse_aug_op(op_name);
      AugResult r = apply_aug_op(op, ex.sentence, deps, rng);
      if (!r.applied) {
        ++skipped;
        continue;
      }
      result = std::move(r.sentence);
      applied = aug_op_name(op);
    } else {
      auto inst = make_satp_instance(ex.sentence, active, deps, rng);
      if (!inst) {
        ++skipped;
        continue;
      }
      result = std::move(inst->sentence);
      applied = aug_op_name(active.op_at(static_cast<std::size_t>(inst->op_label)));
    }
    ++counts[applied];
    len_before += static_cast<double>(ex.sentence.size());
    len_after += static_cast<double>(result.size());
    if (!stats) std::cout << json{{"tokens", result.tokens}, {"op", applied}}.dump() << '\n';
  }
  long produced = 0;
  for (const auto& [_, c] : counts) produced += c;
  if (stats) {
    json fractions = json::object();
    for (const auto& [name, c] : counts) fractions[name] = produced ? static_cast<double>(c) / produced : 0.0;
    std::cout << json{{"instances", produced},
                      {"skipped", skipped},
                      {"op_counts", counts},
                      {"op_fractions", fractions},
                      {"mean_length_before", produced ? len_before / produced : 0.0},
                      {"mean_length_after", produced ? len_after / produced : 0.0}}
                     .dump(2)
              << '\n';
  } else if (skipped > 0) {
    std::cerr << "skipped " << skipped << " sentences the operator could not change\n";
  }
  return 0;
}

int cmd_mask(const std::string& input, int max_len, int repeat, double p_mask, std::uint64_t seed, bool stats) {
  const auto examples = read_input(input);
  std::vector<Sentence> sentences;
  for (const auto& ex : examples) sentences.push_back(ex.sentence);
  const Vocab vocab = Vocab::build(sentences, 1);
  MaskingOptions opts;
  opts.p_mask = p_mask;
  Rng rng = make_rng(seed, Stream::kCorruption);
  long maskable = 0, selected = 0;
  std::map<MaskBranch, long> branch_counts;
  std::vector<MaskBranch> branches;
  for (int r = 0; r < repeat; ++r) {
    for (const auto& s : sentences) {
      const auto ids = encode(s, vocab, static_cast<std::size_t>(max_len));
      auto inst = mask_tokens(ids, vocab.size(), opts, rng, &branches);
      if (!inst) continue;
      maskable += static_cast<long>(ids.size()) - 1;
      selected += static_cast<long>(inst->mask_positions.size());
      for (auto b : branches) ++branch_counts[b];
      if (!stats)
        std::cout << json{{"input_ids", inst->input_ids},
                          {"target_ids", inst->target_ids},
                          {"mask_positions", inst->mask_positions}}
                         .dump()
                  << '\n';
    }
  }
  if (stats) {
    auto frac = [&](MaskBranch b) { return selected ? static_cast<double>(branch_counts[b]) / selected : 0.0; };
    std::cout << json{{"maskable_tokens", maskable},
                      {"selected", selected},
                      {"selected_fraction", maskable ? static_cast<double>(selected) / maskable : 0.0},
                      {"branch_fractions",
                       {{"mask", frac(MaskBranch::kMaskToken)},
                        {"random", frac(MaskBranch::kRandomWord)},
                        {"keep", frac(MaskBranch::kKeep)}}}}
                     .dump(2)
              << '\n';
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t samples, int precision) {
  if (precision != 64) throw ConfigError("gradcheck runs in 64-bit only");
  GradCheckOptions opts;
  opts.samples = samples;
  bool ok = true;
  std::cout << "kernels: " << kernels::isa_name(kernels::active_isa()) << std::endl;
  for (const auto& r : check_model_gradients(seed, opts)) {
    std::printf("%-15s max rel error %.3e  mean %.3e  %s\n", r.loss.c_str(), r.report.max_rel_error,
                r.report.mean_rel_error, r.report.passed ? "ok" : "FAIL");
    ok = ok && r.report.passed;
  }
  return ok ? 0 : 1;
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("cannot parse lambda '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised regularization for text classification"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "Generate a synthetic classification task");
  int n = 500, dev = 0, test = 0, classes = 2, vocab = 200;
  double noise = 0.5;
  std::uint64_t seed = 0;
  std::string out = "data/synthetic";
  gen->add_option("--num-examples", n, "Training examples")->check(CLI::PositiveNumber);
  gen->add_option("--dev", dev, "Dev examples")->check(CLI::NonNegativeNumber);
  gen->add_option("--test", test, "Test examples")->check(CLI::NonNegativeNumber);
  gen->add_option("--num-classes", classes, "Classes")->check(CLI::Range(2, 1000));
  gen->add_option("--vocab-size", vocab, "Distinct words");
  gen->add_option("--noise", noise, "Probability that a token is filler")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", seed, "Task and sampling seed");
  gen->add_option("--out", out, "Output directory");

  auto* train_cmd = app.add_subcommand("train", "Train per a config file");
  std::string config;
  Overrides overrides;
  train_cmd->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  add_overrides(train_cmd, overrides);

  auto* sweep_cmd = app.add_subcommand("sweep", "Train once per lambda");
  std::string lambdas;
  sweep_cmd->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--lambdas", lambdas, "Comma-separated values, e.g. 0.01,0.1,1.0")->required();
  add_overrides(sweep_cmd, overrides);

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a trained run on a corpus");
  std::string run_dir, data;
  eval_cmd->add_option("--run", run_dir, "Run directory with best.ckpt and vocab.txt")->required();
  eval_cmd->add_option("--data", data, "Corpus file")->required()->check(CLI::ExistingFile);

  auto* aug_cmd = app.add_subcommand("augment", "Apply augmentation operators to a corpus");
  std::string input, lexicon, stopwords, op;
  std::vector<std::string> ops;
  double rate = 0.1;
  bool stats = false;
  aug_cmd->add_option("--input", input, "Corpus file")->required()->check(CLI::ExistingFile);
  aug_cmd->add_option("--lexicon", lexicon, "Synonym lexicon");
  aug_cmd->add_option("--stopwords", stopwords, "Stopword list (default: shipped English list)");
  aug_cmd->add_option("--op", op, "Apply one operator (SR, RI, RS, RD)");
  aug_cmd->add_option("--ops", ops, "Operators to draw from when --op is absent")->delimiter(',');
  aug_cmd->add_option("--rate", rate, "Augmentation rate")->check(CLI::Range(0.0, 1.0));
  aug_cmd->add_option("--seed", seed, "Seed");
  aug_cmd->add_flag("--stats", stats, "Print summary statistics instead of instances");

  auto* mask_cmd = app.add_subcommand("mask", "Apply masked-token corruption to a corpus");
  int max_len = 128, repeat = 1;
  double p_mask = 0.15;
  mask_cmd->add_option("--input", input, "Corpus file")->required()->check(CLI::ExistingFile);
  mask_cmd->add_option("--max-len", max_len, "Encoded length including [CLS]")->check(CLI::Range(2, 1 << 20));
  mask_cmd->add_option("--repeat", repeat, "Passes over the corpus")->check(CLI::PositiveNumber);
  mask_cmd->add_option("--p-mask", p_mask, "Selection probability");
  mask_cmd->add_option("--seed", seed, "Seed");
  mask_cmd->add_flag("--stats", stats, "Print summary statistics instead of instances");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  std::size_t samples = 100;
  int precision = 64;
  grad_cmd->add_option("--seed", seed, "Seed");
  grad_cmd->add_option("--samples", samples, "Sampled entries per loss")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--precision", precision, "Must be 64")->check(CLI::IsMember({32, 64}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(n, dev, test, classes, vocab, noise, seed, out);
    if (*train_cmd) {
      const RunSummary s = run_experiment(load_with(config, overrides), std::cerr);
      std::cout << read_file_binary(s.dir / "metrics.json");
      return 0;
    }
    if (*sweep_cmd) {
      const ExperimentConfig c = load_with(config, overrides);
      const std::vector<double> values = parse_lambdas(lambdas);
      sweep(c, values, std::cerr);
      std::cout << read_file_binary(c.run_dir() / "sweep_summary.json");
      return 0;
    }
    if (*eval_cmd) {
      std::cout << metrics_json(evaluate_checkpoint(run_dir, data)) << '\n';
      return 0;
    }
    if (*aug_cmd) return cmd_augment(input, lexicon, stopwords, op, ops, rate, seed, stats);
    if (*mask_cmd) return cmd_mask(input, max_len, repeat, p_mask, seed, stats);
    if (*grad_cmd) return cmd_gradcheck(seed, samples, precision);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
