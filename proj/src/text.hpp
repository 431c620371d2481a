#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace actsum {

using Tokens = std::vector<std::string>;

// Lowercases, splits punctuation off into its own tokens and splits on
// whitespace. Bracketed markers such as "<sep>" stay atomic.
Tokens tokenize(std::string_view text);

inline constexpr std::string_view kSentenceSeparator = "<sep>";

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnknown = 3;

  Vocab();
  // Tokens in id order; the first four must be the special tokens.
  explicit Vocab(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Stops at the end marker and drops pad/start ids.
  Tokens decode(std::span<const int> ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Tokens with frequency >= min_freq, ordered by frequency descending then
// lexicographically, after the four specials.
Vocab build_vocab(std::span<const Tokens> texts, int min_freq);

}  // namespace actsum
