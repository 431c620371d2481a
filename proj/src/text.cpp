#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "error.hpp"

namespace actsum {
namespace {

const std::vector<std::string> kSpecials = {"<pad>", "<s>", "</s>", "<unk>"};

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (c == '<') {
      const auto close = text.find('>', i);
      const bool marker = close != std::string_view::npos &&
                          text.substr(i + 1, close - i - 1).find_first_of(" \t\n<") ==
                              std::string_view::npos &&
                          close > i + 1;
      flush();
      if (marker) {
        std::string m(text.substr(i, close - i + 1));
        std::transform(m.begin(), m.end(), m.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        out.push_back(std::move(m));
        i = close;
      } else {
        out.emplace_back(1, '<');
      }
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

Vocab::Vocab() : Vocab(kSpecials) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kSpecials.size() ||
      !std::equal(kSpecials.begin(), kSpecials.end(), tokens_.begin()))
    throw DomainError("vocab must start with the special tokens <pad> <s> </s> <unk>");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw DomainError("duplicate vocab token '" + tokens_[i] + "'");
  }
}

int Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw DomainError("vocab id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocab::decode(std::span<const int> ids) const {
  Tokens out;
  for (int i : ids) {
    if (i == kEnd) break;
    if (i == kPad || i == kStart) continue;
    out.push_back(token(i));
  }
  return out;
}

Vocab build_vocab(std::span<const Tokens> texts, int min_freq) {
  if (texts.empty()) throw DomainError("build_vocab: no texts");
  std::map<std::string, long> counts;
  for (const auto& t : texts)
    for (const auto& tok : t) ++counts[tok];
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_freq &&
        std::find(kSpecials.begin(), kSpecials.end(), tok) == kSpecials.end())
      kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = kSpecials;
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab(std::move(tokens));
}

}  // namespace actsum
