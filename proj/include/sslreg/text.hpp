#pragma once

// Word-level text pipeline: tokenization, vocabulary, corpus and lexicon files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sslreg {

using TokenId = std::int32_t;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kCls = 2;
inline constexpr TokenId kMask = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kCount = 5;
}  // namespace special

/// Ordered lowercased words. Never empty once produced by `tokenize`.
struct Sentence {
  std::vector<std::string> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

struct LabeledExample {
  Sentence sentence;
  int label = 0;
};

class Vocab {
 public:
  /// Specials first (PAD, UNK, CLS, MASK, SEP), then words by descending
  /// frequency with ties broken lexicographically.
  static Vocab build(std::span<const Sentence> corpus, int min_freq);

  /// Rebuilds from an id-ordered token list (the first five must be the specials).
  static Vocab from_tokens(std::vector<std::string> id_to_token);

  std::size_t size() const noexcept { return id_to_token_.size(); }
  TokenId id(std::string_view token) const;  // UNK when absent
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }

  static bool is_special(TokenId id) noexcept { return id >= 0 && id < special::kCount; }
  static bool is_special_token(std::string_view token) noexcept;

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Lowercases, splits on whitespace, strips punctuation from token edges.
/// Throws if nothing remains.
Sentence tokenize(std::string_view text);

/// [CLS] followed by word ids, truncated to max_len positions.
std::vector<TokenId> encode(const Sentence& sentence, const Vocab& vocab, std::size_t max_len);

class SynonymLexicon {
 public:
  SynonymLexicon() = default;
  /// Each group needs at least two distinct words.
  explicit SynonymLexicon(std::vector<std::vector<std::string>> synsets);

  /// Words sharing a synset with `word`, excluding `word`; sorted, unique.
  std::vector<std::string> synonyms_of(std::string_view word) const;
  bool has_synonyms(std::string_view word) const;
  const std::vector<std::vector<std::string>>& synsets() const noexcept { return synsets_; }

 private:
  std::vector<std::vector<std::string>> synsets_;
  std::unordered_map<std::string, std::vector<std::size_t>> word_to_synsets_;
};

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::vector<std::string> words);
  bool contains(std::string_view word) const;
  std::size_t size() const noexcept { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

/// `<label>\t<text>` per line; blank lines are skipped.
std::vector<LabeledExample> load_corpus(const std::filesystem::path& path);
std::vector<LabeledExample> parse_corpus(std::string_view content, const std::string& source);
SynonymLexicon load_lexicon(const std::filesystem::path& path);
SynonymLexicon parse_lexicon(std::string_view content, const std::string& source);
StopwordSet load_stopwords(const std::filesystem::path& path);
StopwordSet parse_stopwords(std::string_view content);

/// The stopword list shipped under data/.
std::filesystem::path default_stopwords_path();

std::string to_lower_ascii(std::string_view s);

}  // namespace sslreg
