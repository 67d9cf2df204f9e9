#pragma once

// A learnable desk-scale classification task. Each class owns a set of
// signature words; every token is a shared filler word with probability
// `noise` and a signature word of the example's class otherwise. Filler words
// are grouped into synsets so synonym-based augmentation has material.

#include <cstdint>
#include <string>
#include <vector>

#include "sslreg/rng.hpp"
#include "sslreg/text.hpp"

namespace sslreg {

struct SyntheticSpec {
  int num_classes = 2;
  int vocab_size = 200;  // distinct words, signatures plus fillers
  double noise = 0.5;
  std::uint64_t seed = 0;
  double signature_fraction = 0.5;
  int min_words = 8;
  int max_words = 16;
  int synset_size = 3;

  void validate() const;
};

class SyntheticTask {
 public:
  explicit SyntheticTask(const SyntheticSpec& spec);

  /// Labels are uniform over classes.
  std::vector<LabeledExample> sample(std::size_t n, Rng& rng) const;

  const std::vector<std::vector<std::string>>& signatures() const noexcept { return signatures_; }
  const std::vector<std::string>& fillers() const noexcept { return fillers_; }
  const std::vector<std::vector<std::string>>& synsets() const noexcept { return synsets_; }
  const SyntheticSpec& spec() const noexcept { return spec_; }

 private:
  SyntheticSpec spec_;
  std::vector<std::vector<std::string>> signatures_;
  std::vector<std::string> fillers_;
  std::vector<std::vector<std::string>> synsets_;
};

/// `num_examples` examples from a task fixed by `seed`.
std::vector<LabeledExample> gen_synthetic(std::size_t num_examples, int num_classes, int vocab_size, double noise,
                                          std::uint64_t seed);

std::string format_corpus(const std::vector<LabeledExample>& examples);
std::string format_lexicon(const std::vector<std::vector<std::string>>& synsets);

}  // namespace sslreg
