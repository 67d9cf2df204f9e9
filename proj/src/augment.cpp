#include "sslreg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "sslreg/error.hpp"

namespace sslreg {
namespace {

void check_rate(double rate, const char* op) {
  if (!(rate > 0.0 && rate <= 1.0))
    throw Error(std::string(op) + ": rate must be in (0, 1], got " + std::to_string(rate));
}

bool insertion_candidate(const std::string& w, const SynonymLexicon& lexicon,
                         const StopwordSet& stopwords) {
  return !stopwords.contains(w) && lexicon.has_synonyms(w);
}

}  // namespace

std::string_view aug_op_name(AugOp op) {
  switch (op) {
    case AugOp::kSR: return "SR";
    case AugOp::kRI: return "RI";
    case AugOp::kRS: return "RS";
    case AugOp::kRD: return "RD";
  }
  return "?";
}

AugOp parse_aug_op(std::string_view name) {
  for (AugOp op : kAllAugOps)
    if (aug_op_name(op) == name) return op;
  throw Error("unknown augmentation operator '" + std::string(name) + "' (expected SR, RI, RS, RD)");
}

AugOpSet::AugOpSet(std::span<const AugOp> ops) {
  for (AugOp op : kAllAugOps)
    if (std::find(ops.begin(), ops.end(), op) != ops.end()) ops_.push_back(op);
  if (ops_.empty()) throw Error("augmentation operator set must not be empty");
}

int AugOpSet::label_of(AugOp op) const {
  auto it = std::find(ops_.begin(), ops_.end(), op);
  if (it == ops_.end())
    throw Error("operator " + std::string(aug_op_name(op)) + " is not in the active set");
  return static_cast<int>(it - ops_.begin());
}

bool AugOpSet::contains(AugOp op) const noexcept {
  return std::find(ops_.begin(), ops_.end(), op) != ops_.end();
}

std::size_t augmentation_count(double rate, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::lround(rate * static_cast<double>(n)));
  return std::max<std::size_t>(1, k);
}

AugResult synonym_replacement(const Sentence& s, const SynonymLexicon& lexicon,
                              const StopwordSet& stopwords, double rate, Rng& rng) {
  check_rate(rate, "synonym_replacement");
  // Distinct eligible words in first-occurrence order.
  std::vector<std::string> eligible;
  std::set<std::string> seen;
  std::size_t eligible_tokens = 0;
  for (const auto& w : s.tokens)
    if (insertion_candidate(w, lexicon, stopwords)) {
      ++eligible_tokens;
      if (seen.insert(w).second) eligible.push_back(w);
    }
  if (eligible.empty()) return {s, false};

  // k counts eligible tokens and is capped by the distinct words available.
  const std::size_t k = std::min(augmentation_count(rate, eligible_tokens), eligible.size());
  std::shuffle(eligible.begin(), eligible.end(), rng);

  Sentence out = s;
  for (std::size_t i = 0; i < k; ++i) {
    const auto synonyms = lexicon.synonyms_of(eligible[i]);
    const std::string& replacement = synonyms[uniform_index(rng, synonyms.size())];
    // Replacement is decided against the input so an earlier substitution is
    // never substituted again.
    for (std::size_t pos = 0; pos < s.tokens.size(); ++pos)
      if (s.tokens[pos] == eligible[i]) out.tokens[pos] = replacement;
  }
  return {std::move(out), true};
}

AugResult random_insertion(const Sentence& s, const SynonymLexicon& lexicon,
                           const StopwordSet& stopwords, double rate, Rng& rng) {
  check_rate(rate, "random_insertion");
  const bool any = std::any_of(s.tokens.begin(), s.tokens.end(), [&](const std::string& w) {
    return insertion_candidate(w, lexicon, stopwords);
  });
  if (!any) return {s, false};

  const std::size_t k = augmentation_count(rate, s.size());
  Sentence out = s;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> candidates;
    for (std::size_t pos = 0; pos < out.tokens.size(); ++pos)
      if (insertion_candidate(out.tokens[pos], lexicon, stopwords)) candidates.push_back(pos);
    const auto& source = out.tokens[candidates[uniform_index(rng, candidates.size())]];
    const auto synonyms = lexicon.synonyms_of(source);
    std::string word = synonyms[uniform_index(rng, synonyms.size())];
    const std::size_t at = uniform_index(rng, out.tokens.size() + 1);
    out.tokens.insert(out.tokens.begin() + static_cast<std::ptrdiff_t>(at), std::move(word));
  }
  return {std::move(out), true};
}

AugResult random_swap(const Sentence& s, double rate, Rng& rng) {
  check_rate(rate, "random_swap");
  if (s.size() < 2) return {s, false};
  const std::size_t k = augmentation_count(rate, s.size());
  Sentence out = s;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t a = uniform_index(rng, out.size());
    std::size_t b = uniform_index(rng, out.size() - 1);
    if (b >= a) ++b;
    std::swap(out.tokens[a], out.tokens[b]);
  }
  return {std::move(out), true};
}

AugResult random_deletion(const Sentence& s, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw Error("random_deletion: p must be in [0, 1), got " + std::to_string(p));
  if (s.tokens.empty()) return {s, false};
  Sentence out;
  std::bernoulli_distribution drop(p);
  for (const auto& w : s.tokens)
    if (!drop(rng)) out.tokens.push_back(w);
  if (out.tokens.empty()) out.tokens.push_back(s.tokens[uniform_index(rng, s.size())]);
  return {std::move(out), true};
}

AugResult apply_aug_op(AugOp op, const Sentence& s, const AugmentationDeps& deps, Rng& rng) {
  switch (op) {
    case AugOp::kSR: return synonym_replacement(s, deps.lexicon, deps.stopwords, deps.rate, rng);
    case AugOp::kRI: return random_insertion(s, deps.lexicon, deps.stopwords, deps.rate, rng);
    case AugOp::kRS: return random_swap(s, deps.rate, rng);
    case AugOp::kRD: return random_deletion(s, deps.rate, rng);
  }
  throw Error("apply_aug_op: invalid operator");
}

std::optional<AugmentedInstance> make_satp_instance(const Sentence& s, const AugOpSet& active,
                                                    const AugmentationDeps& deps, Rng& rng) {
  std::vector<AugOp> remaining = active.ops();
  while (!remaining.empty()) {
    const std::size_t pick = uniform_index(rng, remaining.size());
    const AugOp op = remaining[pick];
    // RD cannot change a single-token sentence (keep-one rule).
    const bool can_act = !(op == AugOp::kRD && s.size() < 2);
    if (can_act) {
      AugResult r = apply_aug_op(op, s, deps, rng);
      if (r.applied) return AugmentedInstance{std::move(r.sentence), active.label_of(op)};
    }
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return std::nullopt;
}

}  // namespace sslreg
