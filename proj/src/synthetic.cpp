#include "sslreg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include "sslreg/error.hpp"

namespace sslreg {
namespace {

// Function words mixed into the filler pool; they are never put in a synset.
constexpr std::array<const char*, 6> kFunctionWords = {"the", "a", "of", "and", "to", "is"};

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw Error("synthetic: num_classes must be >= 2");
  if (!(noise >= 0.0 && noise <= 1.0)) throw Error("synthetic: noise must be in [0, 1]");
  if (!(signature_fraction > 0.0 && signature_fraction < 1.0))
    throw Error("synthetic: signature_fraction must be in (0, 1)");
  if (min_words < 1 || max_words < min_words) throw Error("synthetic: need 1 <= min_words <= max_words");
  if (synset_size < 2) throw Error("synthetic: synset_size must be >= 2");
  const int signatures = static_cast<int>(vocab_size * signature_fraction);
  if (signatures < num_classes) throw Error("synthetic: vocab_size too small for one signature word per class");
  if (vocab_size - signatures < static_cast<int>(kFunctionWords.size()) + synset_size)
    throw Error("synthetic: vocab_size too small for the filler pool");
}

SyntheticTask::SyntheticTask(const SyntheticSpec& spec) : spec_(spec) {
  spec_.validate();
  const int signatures = static_cast<int>(spec.vocab_size * spec.signature_fraction);
  signatures_.resize(static_cast<std::size_t>(spec.num_classes));
  for (int i = 0; i < signatures; ++i)
    signatures_[static_cast<std::size_t>(i % spec.num_classes)].push_back(
        "c" + std::to_string(i % spec.num_classes) + "w" + std::to_string(i / spec.num_classes));

  for (const char* w : kFunctionWords) fillers_.emplace_back(w);
  const int content_fillers = spec.vocab_size - signatures - static_cast<int>(kFunctionWords.size());
  std::vector<std::string> content;
  for (int i = 0; i < content_fillers; ++i) content.push_back("f" + std::to_string(i));
  fillers_.insert(fillers_.end(), content.begin(), content.end());

  // Synset membership is the only seed-dependent part of the vocabulary.
  Rng rng = make_rng(spec.seed, Stream::kData);
  std::shuffle(content.begin(), content.end(), rng);
  const auto size = static_cast<std::size_t>(spec.synset_size);
  for (std::size_t i = 0; i + size <= content.size(); i += size)
    synsets_.emplace_back(content.begin() + static_cast<std::ptrdiff_t>(i),
                          content.begin() + static_cast<std::ptrdiff_t>(i + size));
}

std::vector<LabeledExample> SyntheticTask::sample(std::size_t n, Rng& rng) const {
  std::vector<LabeledExample> out;
  out.reserve(n);
  std::uniform_int_distribution<int> length(spec_.min_words, spec_.max_words);
  std::bernoulli_distribution filler(spec_.noise);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledExample ex;
    ex.label = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec_.num_classes)));
    const auto& own = signatures_[static_cast<std::size_t>(ex.label)];
    const int len = length(rng);
    for (int t = 0; t < len; ++t) {
      if (filler(rng))
        ex.sentence.tokens.push_back(fillers_[uniform_index(rng, fillers_.size())]);
      else
        ex.sentence.tokens.push_back(own[uniform_index(rng, own.size())]);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> gen_synthetic(std::size_t num_examples, int num_classes, int vocab_size, double noise,
                                          std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_classes = num_classes;
  spec.vocab_size = vocab_size;
  spec.noise = noise;
  spec.seed = seed;
  SyntheticTask task(spec);
  Rng rng = make_rng(seed, Stream::kBatchOrder);
  return task.sample(num_examples, rng);
}

std::string format_corpus(const std::vector<LabeledExample>& examples) {
  std::ostringstream ss;
  for (const auto& ex : examples) {
    ss << ex.label << '\t';
    for (std::size_t i = 0; i < ex.sentence.tokens.size(); ++i) ss << (i ? " " : "") << ex.sentence.tokens[i];
    ss << '\n';
  }
  return ss.str();
}

std::string format_lexicon(const std::vector<std::vector<std::string>>& synsets) {
  std::ostringstream ss;
  for (const auto& group : synsets) {
    for (std::size_t i = 0; i < group.size(); ++i) ss << (i ? " " : "") << group[i];
    ss << '\n';
  }
  return ss.str();
}

}  // namespace sslreg
