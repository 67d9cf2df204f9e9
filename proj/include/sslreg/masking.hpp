#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sslreg/rng.hpp"
#include "sslreg/text.hpp"

namespace sslreg {

/// Corrupted sequence plus supervision for masked-token prediction.
/// `target_ids[p]` holds the original id at every selected position and PAD
/// elsewhere; `mask_positions` is sorted and never contains position 0.
struct MaskedInstance {
  std::vector<TokenId> input_ids;
  std::vector<TokenId> target_ids;
  std::vector<std::size_t> mask_positions;
};

enum class MaskBranch { kMaskToken, kRandomWord, kKeep };

struct MaskingOptions {
  double p_mask = 0.15;
  double p_replace_mask = 0.8;
  double p_replace_random = 0.1;
};

/// Each maskable position (not CLS, not PAD) is selected with probability
/// p_mask; at least one is forced. Selected positions become [MASK] (80%),
/// a uniformly drawn non-special id (10%) or stay unchanged (10%).
/// nullopt when nothing is maskable. `branches`, if given, receives the branch
/// taken at each selected position, in position order.
std::optional<MaskedInstance> mask_tokens(std::span<const TokenId> ids, std::size_t vocab_size,
                                          const MaskingOptions& options, Rng& rng,
                                          std::vector<MaskBranch>* branches = nullptr);

}  // namespace sslreg
