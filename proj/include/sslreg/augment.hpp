#pragma once

// Sentence augmentation operators and augmentation-type training instances.

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sslreg/rng.hpp"
#include "sslreg/text.hpp"

namespace sslreg {

/// Canonical order fixes label indices: SR=0, RI=1, RS=2, RD=3.
enum class AugOp : int { kSR = 0, kRI = 1, kRS = 2, kRD = 3 };

inline constexpr std::array<AugOp, 4> kAllAugOps = {AugOp::kSR, AugOp::kRI, AugOp::kRS, AugOp::kRD};

std::string_view aug_op_name(AugOp op);
AugOp parse_aug_op(std::string_view name);

/// A non-empty set of operators. Labels are dense indices in canonical order,
/// so {SR, RD} maps SR->0, RD->1.
class AugOpSet {
 public:
  AugOpSet() : AugOpSet(std::span<const AugOp>(kAllAugOps)) {}
  explicit AugOpSet(std::span<const AugOp> ops);

  std::size_t size() const noexcept { return ops_.size(); }
  AugOp op_at(std::size_t label) const { return ops_.at(label); }
  int label_of(AugOp op) const;  // throws if not active
  bool contains(AugOp op) const noexcept;
  const std::vector<AugOp>& ops() const noexcept { return ops_; }

 private:
  std::vector<AugOp> ops_;
};

/// Operator output. `applied == false` means the operator had nothing to act
/// on and `sentence` is the unchanged input.
struct AugResult {
  Sentence sentence;
  bool applied = true;
};

struct AugmentedInstance {
  Sentence sentence;
  int op_label = 0;
};

/// k = max(1, round(rate * n)), the count rule shared by SR, RI and RS.
std::size_t augmentation_count(double rate, std::size_t n);

AugResult synonym_replacement(const Sentence& s, const SynonymLexicon& lexicon,
                              const StopwordSet& stopwords, double rate, Rng& rng);
AugResult random_insertion(const Sentence& s, const SynonymLexicon& lexicon,
                           const StopwordSet& stopwords, double rate, Rng& rng);
AugResult random_swap(const Sentence& s, double rate, Rng& rng);
/// Never returns an empty sentence: if every token is deleted, one original
/// token chosen uniformly is kept.
AugResult random_deletion(const Sentence& s, double p, Rng& rng);

struct AugmentationDeps {
  const SynonymLexicon& lexicon;
  const StopwordSet& stopwords;
  double rate = 0.1;
};

AugResult apply_aug_op(AugOp op, const Sentence& s, const AugmentationDeps& deps, Rng& rng);

/// Picks an operator uniformly from `active`; if it cannot act, resamples among
/// the remaining ones. nullopt when no active operator can change `s`.
std::optional<AugmentedInstance> make_satp_instance(const Sentence& s, const AugOpSet& active,
                                                    const AugmentationDeps& deps, Rng& rng);

}  // namespace sslreg
