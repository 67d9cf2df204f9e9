#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sslreg/error.hpp"
#include "sslreg/io.hpp"
#include "sslreg/runner.hpp"
#include "sslreg/synthetic.hpp"

using namespace sslreg;
namespace fs = std::filesystem;

namespace {

fs::path make_workspace(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  SyntheticSpec spec;
  spec.vocab_size = 60;
  spec.seed = 2;
  spec.min_words = 4;
  spec.max_words = 8;
  const SyntheticTask task(spec);
  Rng rng = make_rng(2, Stream::kData);
  write_file_atomic(dir / "train.tsv", format_corpus(task.sample(40, rng)));
  write_file_atomic(dir / "dev.tsv", format_corpus(task.sample(20, rng)));
  write_file_atomic(dir / "test.tsv", format_corpus(task.sample(20, rng)));
  write_file_atomic(dir / "lexicon.txt", format_lexicon(task.synsets()));
  write_file_atomic(dir / "run.toml",
                    "run_name = \"r\"\ntrain_path = \"train.tsv\"\ndev_path = \"dev.tsv\"\n"
                    "test_path = \"test.tsv\"\nlexicon_path = \"lexicon.txt\"\noutput_dir = \"out\"\n"
                    "regime = \"ssl_reg_satp\"\nlambda = 0.1\nepochs = 2\nbatch_size = 8\n"
                    "num_layers = 1\nnum_heads = 2\nd_model = 16\nd_ff = 32\nmax_len = 12\n");
  return dir;
}

}  // namespace

TEST_CASE("a run writes every artifact and is repeatable") {
  const fs::path dir = make_workspace("sslreg_runner_test");
  const ExperimentConfig c = load_config(dir / "run.toml");
  std::ostringstream log;
  const RunSummary s = run_experiment(c, log);
  CHECK(s.dir == dir / "out" / "r");
  CHECK(log.str().find("parameters") != std::string::npos);
  for (const char* f : {"history.jsonl", "best.ckpt", "vocab.txt", "metrics.json"}) CHECK(fs::exists(s.dir / f));

  std::istringstream history(read_file_binary(s.dir / "history.jsonl"));
  int lines = 0;
  for (std::string line; std::getline(history, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "lr", "loss_c", "loss_p", "lambda", "train", "dev", "test"})
      CHECK(j.contains(key));
  }
  CHECK(lines == 2);

  const std::string metrics = read_file_binary(s.dir / "metrics.json");
  const auto j = nlohmann::json::parse(metrics);
  CHECK(j["regime"] == "ssl_reg_satp");
  CHECK(j["dev"]["examples"] == 20);
  CHECK(j.contains("gap"));

  run_experiment(c, log);
  CHECK(read_file_binary(s.dir / "metrics.json") == metrics);

  const MetricSet dev = evaluate_checkpoint(s.dir, dir / "dev.tsv");
  CHECK(dev == *s.dev);
  fs::remove_all(dir);
}

TEST_CASE("sweep") {
  const fs::path dir = make_workspace("sslreg_sweep_test");
  ExperimentConfig c = load_config(dir / "run.toml");
  c.train.epochs = 1;
  std::ostringstream log;
  CHECK_THROWS_AS(sweep(c, std::vector<double>{}, log), ConfigError);
  CHECK_THROWS_AS(sweep(c, std::vector<double>{0.1, 0.1}, log), ConfigError);
  const auto rows = sweep(c, std::vector<double>{0.01, 0.1, 1.0}, log);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].dir == dir / "out" / "r" / "lambda_0.1");
  const auto summary = nlohmann::json::parse(read_file_binary(dir / "out" / "r" / "sweep_summary.json"));
  CHECK(summary["rows"].size() == 3);
  CHECK(summary["rows"][2]["lambda"] == 1.0);
  CHECK(summary["rows"][0].contains("train_test_gap"));
  fs::remove_all(dir);
}

TEST_CASE("bad inputs fail before training") {
  const fs::path dir = make_workspace("sslreg_runner_bad_test");
  ExperimentConfig c = load_config(dir / "run.toml");
  std::ostringstream log;
  c.train_path = dir / "missing.tsv";
  CHECK_THROWS(run_experiment(c, log));

  write_file_atomic(dir / "labels.tsv", "0\ta b\n5\tc d\n");
  c = load_config(dir / "run.toml");
  c.train_path = dir / "labels.tsv";
  c.num_classes = 2;
  CHECK_THROWS_AS(run_experiment(c, log), ConfigError);
  CHECK_FALSE(fs::exists(c.run_dir()));
  fs::remove_all(dir);
}

TEST_CASE("vocabulary files and number formatting") {
  const fs::path dir = fs::temp_directory_path() / "sslreg_vocab_test";
  const std::vector<Sentence> corpus{Sentence{{"b", "a", "a"}}};
  const Vocab v = Vocab::build(corpus, 1);
  save_vocab(dir / "vocab.txt", v);
  CHECK(load_vocab(dir / "vocab.txt").tokens() == v.tokens());
  fs::remove_all(dir);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(0.01) == "0.01");
}
