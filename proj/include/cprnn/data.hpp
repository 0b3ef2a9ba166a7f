#pragma once

// Character corpora: UTF-8 decoding, a codepoint-sorted vocabulary with a
// reserved unknown symbol at index 0, and contiguous train/valid/test splits.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cprnn/training.hpp"

namespace cprnn {

/// Throws DataError on malformed input.
std::u32string utf8_decode(std::string_view bytes);
std::string utf8_encode(std::u32string_view codepoints);

class Vocab {
 public:
  static constexpr Token kUnknown = 0;

  Vocab() = default;
  /// `symbols` must be strictly increasing; they get indices 1..size.
  explicit Vocab(std::vector<char32_t> symbols);

  /// Input dimension d, reserved index included.
  Index size() const { return static_cast<Index>(symbols_.size()) + 1; }
  const std::vector<char32_t>& symbols() const { return symbols_; }

  Token index_of(char32_t c) const;
  /// U+FFFD for the reserved index; DataError when out of range.
  char32_t symbol_of(Token t) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.symbols_ == b.symbols_; }

 private:
  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, Token> index_;
};

/// Distinct codepoints of `text`, sorted. Empty text is rejected.
Vocab build_vocab(std::string_view text);
std::vector<Token> encode(std::string_view text, const Vocab& vocab);
std::string decode(std::span<const Token> tokens, const Vocab& vocab);

struct Corpus {
  Vocab vocab;
  std::vector<Token> train;
  std::vector<Token> valid;
  std::vector<Token> test;
};

/// Cuts `tokens` into three contiguous pieces of relative sizes `fractions`
/// (train, valid, test), which must be non-negative and sum to 1.
Corpus split(std::span<const Token> tokens, const Vocab& vocab, std::array<double, 3> fractions);

std::string read_text_file(const std::string& path);

/// Vocabulary from the training file alone; unseen characters in the other
/// splits map to the reserved index.
Corpus load_corpus(const std::string& train_path, const std::string& valid_path, const std::string& test_path);
/// Single file: vocabulary over the whole text, then a contiguous split.
Corpus load_corpus(const std::string& path, std::array<double, 3> fractions);

/// Seeded pseudo-English text of `bytes` ASCII characters: a fixed lexicon
/// of invented words strung together by a sparse word-level Markov chain,
/// with punctuation and line breaks. Predictable enough for model size to
/// matter and cheap to produce at any length.
std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed);

}  // namespace cprnn
