#include "sslreg/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sslreg/error.hpp"

namespace sslreg {
namespace {

constexpr std::array<std::string_view, special::kCount> kSpecialTokens = {
    "[PAD]", "[UNK]", "[CLS]", "[MASK]", "[SEP]"};

bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Length in bytes of a multi-byte UTF-8 whitespace sequence at `pos`, or 0.
std::size_t unicode_space_length(std::string_view s, std::size_t pos) {
  auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[pos + i]); };
  const std::size_t left = s.size() - pos;
  if (left >= 2 && byte(0) == 0xC2 && (byte(1) == 0x85 || byte(1) == 0xA0)) return 2;
  if (left >= 3 && byte(0) == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;  // U+1680
  if (left >= 3 && byte(0) == 0xE2 && byte(1) == 0x80) {
    const unsigned char c = byte(2);
    if ((c >= 0x80 && c <= 0x8A) || c == 0xA8 || c == 0xA9 || c == 0xAF) return 3;
  }
  if (left >= 3 && byte(0) == 0xE2 && byte(1) == 0x81 && byte(2) == 0x9F) return 3;  // U+205F
  if (left >= 3 && byte(0) == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

std::string strip_edge_punct(std::string_view word) {
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && std::ispunct(static_cast<unsigned char>(word[begin]))) ++begin;
  while (end > begin && std::ispunct(static_cast<unsigned char>(word[end - 1]))) --end;
  return std::string(word.substr(begin, end - begin));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!(nl == content.size() && line.empty())) fn(line_no, line);
    pos = nl + 1;
  }
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return is_ascii_space(static_cast<unsigned char>(c)); });
}

}  // namespace

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Sentence tokenize(std::string_view text) {
  Sentence out;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    std::string word = strip_edge_punct(to_lower_ascii(current));
    if (!word.empty()) out.tokens.push_back(std::move(word));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (is_ascii_space(static_cast<unsigned char>(text[i]))) {
      flush();
      ++i;
    } else if (std::size_t n = unicode_space_length(text, i); n > 0) {
      flush();
      i += n;
    } else {
      current.push_back(text[i]);
      ++i;
    }
  }
  flush();
  if (out.tokens.empty()) throw Error("tokenize: no tokens in input");
  return out;
}

bool Vocab::is_special_token(std::string_view token) noexcept {
  return std::find(kSpecialTokens.begin(), kSpecialTokens.end(), token) != kSpecialTokens.end();
}

Vocab Vocab::build(std::span<const Sentence> corpus, int min_freq) {
  if (corpus.empty()) throw Error("build_vocab: empty corpus");
  if (min_freq < 1) throw Error("build_vocab: min_freq must be >= 1");

  std::map<std::string, std::size_t> freq;
  for (const auto& s : corpus)
    for (const auto& w : s.tokens) ++freq[w];

  std::vector<std::pair<std::string, std::size_t>> words;
  for (auto& [w, n] : freq)
    if (n >= static_cast<std::size_t>(min_freq) && !is_special_token(w)) words.emplace_back(w, n);
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  for (auto& [w, n] : words) tokens.push_back(w);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < special::kCount)
    throw Error("vocab: fewer entries than special tokens");
  for (std::size_t i = 0; i < special::kCount; ++i)
    if (id_to_token[i] != kSpecialTokens[i])
      throw Error("vocab: expected special token " + std::string(kSpecialTokens[i]) + " at id " +
                  std::to_string(i));
  Vocab v;
  v.id_to_token_ = std::move(id_to_token);
  for (std::size_t i = 0; i < v.id_to_token_.size(); ++i) {
    auto [it, inserted] = v.token_to_id_.emplace(v.id_to_token_[i], static_cast<TokenId>(i));
    if (!inserted) throw Error("vocab: duplicate token '" + v.id_to_token_[i] + "'");
  }
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? special::kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return token_to_id_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw Error("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> encode(const Sentence& sentence, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw Error("encode: max_len must be >= 2");
  std::vector<TokenId> ids;
  ids.reserve(std::min(max_len, sentence.size() + 1));
  ids.push_back(special::kCls);
  for (const auto& w : sentence.tokens) {
    if (ids.size() == max_len) break;
    ids.push_back(vocab.id(w));
  }
  return ids;
}

SynonymLexicon::SynonymLexicon(std::vector<std::vector<std::string>> synsets)
    : synsets_(std::move(synsets)) {
  for (std::size_t g = 0; g < synsets_.size(); ++g) {
    std::set<std::string> distinct(synsets_[g].begin(), synsets_[g].end());
    if (distinct.size() < 2)
      throw Error("lexicon: synset " + std::to_string(g) + " needs at least two distinct words");
    for (const auto& w : distinct) word_to_synsets_[w].push_back(g);
  }
}

std::vector<std::string> SynonymLexicon::synonyms_of(std::string_view word) const {
  auto it = word_to_synsets_.find(std::string(word));
  if (it == word_to_synsets_.end()) return {};
  std::set<std::string> out;
  for (std::size_t g : it->second)
    for (const auto& w : synsets_[g])
      if (w != word) out.insert(w);
  return {out.begin(), out.end()};
}

bool SynonymLexicon::has_synonyms(std::string_view word) const {
  return word_to_synsets_.count(std::string(word)) > 0;
}

StopwordSet::StopwordSet(std::vector<std::string> words) {
  for (auto& w : words) words_.insert(to_lower_ascii(w));
}

bool StopwordSet::contains(std::string_view word) const {
  return words_.count(to_lower_ascii(word)) > 0;
}

std::vector<LabeledExample> parse_corpus(std::string_view content, const std::string& source) {
  std::vector<LabeledExample> out;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw ParseError(source, line_no, "missing tab separator");
    const std::string label_text(line.substr(0, tab));
    int label = 0;
    std::size_t consumed = 0;
    try {
      label = std::stoi(label_text, &consumed);
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "label '" + label_text + "' is not an integer");
    }
    if (consumed != label_text.size() || label < 0)
      throw ParseError(source, line_no, "label '" + label_text + "' is not a non-negative integer");
    try {
      out.push_back({tokenize(line.substr(tab + 1)), label});
    } catch (const Error&) {
      throw ParseError(source, line_no, "empty text");
    }
  });
  return out;
}

std::vector<LabeledExample> load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path), path.string());
}

SynonymLexicon parse_lexicon(std::string_view content, const std::string& source) {
  std::vector<std::vector<std::string>> synsets;
  for_each_line(content, [&](std::size_t line_no, std::string_view line) {
    if (is_blank(line)) return;
    std::istringstream ss{std::string(line)};
    std::vector<std::string> group;
    std::set<std::string> seen;
    for (std::string w; ss >> w;) {
      w = to_lower_ascii(w);
      if (seen.insert(w).second) group.push_back(w);
    }
    if (group.size() < 2)
      throw ParseError(source, line_no, "synset needs at least two distinct words");
    synsets.push_back(std::move(group));
  });
  return SynonymLexicon(std::move(synsets));
}

SynonymLexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(read_file(path), path.string());
}

StopwordSet parse_stopwords(std::string_view content) {
  std::vector<std::string> words;
  for_each_line(content, [&](std::size_t, std::string_view line) {
    std::istringstream ss{std::string(line)};
    std::string w;
    if (ss >> w) words.push_back(w);
  });
  return StopwordSet(std::move(words));
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  return parse_stopwords(read_file(path));
}

std::filesystem::path default_stopwords_path() {
  return std::filesystem::path(SSLREG_DATA_DIR) / "stopwords_en.txt";
}

}  // namespace sslreg
