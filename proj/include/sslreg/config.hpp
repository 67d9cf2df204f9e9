#pragma once

// Flat, typed key-value experiment configuration (a TOML subset):
//
//   # comment
//   run_name = "demo"
//   lambda = 0.1
//   active_ops = ["SR", "RD"]
//
// Relative paths resolve against the config file's directory. Unknown keys
// are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sslreg/model.hpp"
#include "sslreg/training.hpp"

namespace sslreg {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>>;

/// Parses `key = value` lines; throws ParseError with the line number.
std::map<std::string, ConfigValue> parse_key_values(std::string_view text, const std::string& source);

struct ExperimentConfig {
  std::string run_name = "run";
  std::filesystem::path train_path, dev_path, test_path;
  std::filesystem::path lexicon_path, stopwords_path;  // stopwords default to the shipped list
  std::filesystem::path output_dir = "runs";
  int min_freq = 1;
  int num_classes = 0;  // 0: one more than the largest training label
  int precision = 32;
  TrainConfig train;
  EncoderConfig encoder;  // vocab_size comes from the data

  void validate() const;
  std::filesystem::path run_dir() const { return output_dir / run_name; }
};

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                              const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_text(c)) reproduces `c`.
std::string to_text(const ExperimentConfig& config);

}  // namespace sslreg
