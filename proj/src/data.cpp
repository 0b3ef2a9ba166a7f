#include "cprnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cprnn/errors.hpp"
#include "cprnn/random.hpp"

namespace cprnn {

std::u32string utf8_decode(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  auto fail = [&](const char* what) {
    throw DataError(std::string("invalid UTF-8 at byte ") + std::to_string(i) + ": " + what);
  };
  while (i < bytes.size()) {
    const auto b0 = static_cast<unsigned char>(bytes[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      fail("bad lead byte");
    }
    if (i + static_cast<std::size_t>(len) > bytes.size()) fail("truncated sequence");
    for (int k = 1; k < len; ++k) {
      const auto bk = static_cast<unsigned char>(bytes[i + k]);
      if ((bk & 0xC0) != 0x80) fail("bad continuation byte");
      cp = (cp << 6) | (bk & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len]) fail("overlong encoding");
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("not a scalar value");
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::string utf8_encode(std::u32string_view codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t c : codepoints) {
    if (c > 0x10FFFF || (c >= 0xD800 && c <= 0xDFFF)) throw DataError("cannot encode non-scalar codepoint");
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

Vocab::Vocab(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (i > 0 && symbols_[i] <= symbols_[i - 1]) throw DataError("vocabulary symbols must be strictly increasing");
    index_.emplace(symbols_[i], static_cast<Token>(i + 1));
  }
}

Token Vocab::index_of(char32_t c) const {
  const auto it = index_.find(c);
  return it == index_.end() ? kUnknown : it->second;
}

char32_t Vocab::symbol_of(Token t) const {
  if (t == kUnknown) return U'\uFFFD';
  if (t < 0 || t >= size()) throw DataError("token " + std::to_string(t) + " outside vocabulary");
  return symbols_[static_cast<std::size_t>(t - 1)];
}

Vocab build_vocab(std::string_view text) {
  if (text.empty()) throw DataError("cannot build a vocabulary from empty text");
  const std::u32string cps = utf8_decode(text);
  const std::set<char32_t> distinct(cps.begin(), cps.end());
  return Vocab(std::vector<char32_t>(distinct.begin(), distinct.end()));
}

std::vector<Token> encode(std::string_view text, const Vocab& vocab) {
  const std::u32string cps = utf8_decode(text);
  std::vector<Token> out;
  out.reserve(cps.size());
  for (char32_t c : cps) out.push_back(vocab.index_of(c));
  return out;
}

std::string decode(std::span<const Token> tokens, const Vocab& vocab) {
  std::u32string cps;
  cps.reserve(tokens.size());
  for (Token t : tokens) cps.push_back(vocab.symbol_of(t));
  return utf8_encode(cps);
}

Corpus split(std::span<const Token> tokens, const Vocab& vocab, std::array<double, 3> fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw DataError("split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DataError("split fractions must sum to 1");
  const auto n = tokens.size();
  const auto n_train = static_cast<std::size_t>(std::floor(fractions[0] * static_cast<double>(n)));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n))));
  Corpus c;
  c.vocab = vocab;
  c.train.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n_train));
  c.valid.assign(tokens.begin() + static_cast<std::ptrdiff_t>(n_train),
                 tokens.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  c.test.assign(tokens.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), tokens.end());
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Corpus load_corpus(const std::string& train_path, const std::string& valid_path, const std::string& test_path) {
  const std::string train = read_text_file(train_path);
  Corpus c;
  c.vocab = build_vocab(train);
  c.train = encode(train, c.vocab);
  c.valid = encode(read_text_file(valid_path), c.vocab);
  c.test = encode(read_text_file(test_path), c.vocab);
  return c;
}

Corpus load_corpus(const std::string& path, std::array<double, 3> fractions) {
  const std::string text = read_text_file(path);
  const Vocab vocab = build_vocab(text);
  return split(encode(text, vocab), vocab, fractions);
}

std::string synthetic_corpus(std::size_t bytes, std::uint64_t seed) {
  auto rng = make_rng(seed, {0x636f72707573});
  static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t",
                                                 "v", "br", "st", "tr", "pl", "gr", "sh", "th"};
  static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou", "ee"};
  static constexpr std::string_view kCodas[] = {"", "", "n", "r", "s", "t", "nd", "ng", "l", "m"};
  auto pick = [&](std::size_t size) { return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng); };

  constexpr std::size_t kWords = 120;
  constexpr std::size_t kFollowers = 4;
  std::vector<std::string> lexicon;
  while (lexicon.size() < kWords) {
    std::string w;
    const std::size_t syllables = 1 + pick(3);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[pick(std::size(kOnsets))];
      w += kVowels[pick(std::size(kVowels))];
      if (s + 1 == syllables) w += kCodas[pick(std::size(kCodas))];
    }
    if (std::find(lexicon.begin(), lexicon.end(), w) == lexicon.end()) lexicon.push_back(std::move(w));
  }
  std::vector<std::array<std::size_t, kFollowers>> next(kWords);
  for (auto& f : next)
    for (auto& w : f) w = pick(kWords);

  std::string text;
  text.reserve(bytes + 64);
  std::size_t word = pick(kWords);
  std::size_t in_sentence = 0;
  std::size_t in_line = 0;
  bool capitalize = true;
  while (text.size() < bytes) {
    std::string w = lexicon[word];
    if (capitalize) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    capitalize = false;
    text += w;
    ++in_sentence;
    // Markov step: mostly the first follower, so common bigrams dominate.
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    word = next[word][u < 0.55 ? 0 : u < 0.8 ? 1 : u < 0.93 ? 2 : 3];
    if (in_sentence >= 4 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.18) {
      text += '.';
      in_sentence = 0;
      capitalize = true;
      if (++in_line >= 3) {
        text += '\n';
        in_line = 0;
        continue;
      }
    } else if (in_sentence >= 3 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.05) {
      text += ',';
    }
    text += ' ';
  }
  text.resize(bytes);
  return text;
}

}  // namespace cprnn
