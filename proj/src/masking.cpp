#include "sslreg/masking.hpp"

#include <string>

#include "sslreg/error.hpp"

namespace sslreg {

std::optional<MaskedInstance> mask_tokens(std::span<const TokenId> ids, std::size_t vocab_size,
                                          const MaskingOptions& options, Rng& rng,
                                          std::vector<MaskBranch>* branches) {
  if (ids.empty() || ids.front() != special::kCls)
    throw Error("mask_tokens: sequence must start with [CLS]");
  if (!(options.p_mask > 0.0 && options.p_mask < 1.0))
    throw Error("mask_tokens: p_mask must be in (0, 1), got " + std::to_string(options.p_mask));

  std::vector<std::size_t> maskable;
  for (std::size_t p = 1; p < ids.size(); ++p)
    if (ids[p] != special::kPad) maskable.push_back(p);
  if (maskable.empty()) return std::nullopt;

  MaskedInstance out;
  out.input_ids.assign(ids.begin(), ids.end());
  out.target_ids.assign(ids.size(), special::kPad);

  std::bernoulli_distribution select(options.p_mask);
  for (std::size_t p : maskable)
    if (select(rng)) out.mask_positions.push_back(p);
  if (out.mask_positions.empty()) out.mask_positions.push_back(maskable[uniform_index(rng, maskable.size())]);

  const bool has_words = vocab_size > static_cast<std::size_t>(special::kCount);
  std::uniform_int_distribution<TokenId> random_word(
      special::kCount, has_words ? static_cast<TokenId>(vocab_size - 1) : special::kCount);
  if (branches) branches->clear();
  for (std::size_t p : out.mask_positions) {
    out.target_ids[p] = ids[p];
    const double u = uniform01(rng);
    MaskBranch branch = MaskBranch::kKeep;
    if (u < options.p_replace_mask) {
      branch = MaskBranch::kMaskToken;
      out.input_ids[p] = special::kMask;
    } else if (u < options.p_replace_mask + options.p_replace_random) {
      branch = MaskBranch::kRandomWord;
      // Fallback when the vocabulary holds no ordinary word.
      out.input_ids[p] = has_words ? random_word(rng) : special::kMask;
    }
    if (branches) branches->push_back(branch);
  }
  return out;
}

}  // namespace sslreg
