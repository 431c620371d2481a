#pragma once

// Hand-worked metric cases. Expected values are written as the fractions they
// were derived from so each line can be re-checked on paper.
#include <cmath>
#include <string>
#include <vector>

namespace actsum::testing {

enum class MetricKind { RougeN, RougeL, Bleu };

struct MetricCase {
  const char* name;
  MetricKind kind;
  int n;  // n-gram order for rouge_n, max_n for bleu
  std::vector<std::string> candidates;
  std::vector<std::vector<std::string>> references;  // rouge: all refs of the one candidate; bleu: one per candidate
  double recall;     // rouge_n only
  double precision;  // rouge_n only
  double score;      // f1 for rouge, the score for bleu
};

inline const std::vector<MetricCase>& metric_cases() {
  static const std::vector<MetricCase> cases = {
      // rouge_n
      {"rouge1 prefix of reference", MetricKind::RougeN, 1, {"the cat"}, {{"the cat sat"}}, 2.0 / 3, 1.0, 0.8},
      {"rouge2 disjoint", MetricKind::RougeN, 2, {"a b"}, {{"c d"}}, 0, 0, 0},
      {"rouge1 identity", MetricKind::RougeN, 1, {"the cat sat on the mat"}, {{"the cat sat on the mat"}}, 1, 1, 1},
      {"rouge2 identity", MetricKind::RougeN, 2, {"the cat sat on the mat"}, {{"the cat sat on the mat"}}, 1, 1, 1},
      // overlap clipped to the single "the" in the reference
      {"rouge1 clipped repeats", MetricKind::RougeN, 1, {"the the the"}, {{"the cat"}}, 1.0 / 2, 1.0 / 3, 0.4},
      {"rouge2 partial", MetricKind::RougeN, 2, {"the cat sat"}, {{"the cat sat on the mat"}}, 2.0 / 5, 1.0,
       4.0 / 7},
      {"rouge2 candidate shorter than n", MetricKind::RougeN, 2, {"a"}, {{"a b"}}, 0, 0, 0},
      {"rouge2 reference shorter than n", MetricKind::RougeN, 2, {"a b"}, {{"a"}}, 0, 0, 0},
      {"rouge1 best of two references", MetricKind::RougeN, 1, {"the cat"}, {{"a dog"}, {"the cat sat"}}, 2.0 / 3,
       1.0, 0.8},
      {"rouge1 clipping both sides", MetricKind::RougeN, 1, {"a a b"}, {{"a b b"}}, 2.0 / 3, 2.0 / 3, 2.0 / 3},
      {"rouge3 one shared trigram", MetricKind::RougeN, 3, {"a b c d"}, {{"a b c e"}}, 0.5, 0.5, 0.5},
      {"rouge1 ignores order", MetricKind::RougeN, 1, {"c b a"}, {{"a b c"}}, 1, 1, 1},
      {"rouge2 reversed order", MetricKind::RougeN, 2, {"c b a"}, {{"a b c"}}, 0, 0, 0},
      // rouge_l
      {"rougeL swapped tail", MetricKind::RougeL, 0, {"a c b"}, {{"a b c"}}, 0, 0, 2.0 / 3},
      {"rougeL empty candidate", MetricKind::RougeL, 0, {""}, {{"a b"}}, 0, 0, 0},
      {"rougeL identity", MetricKind::RougeL, 0, {"put a mug on the desk"}, {{"put a mug on the desk"}}, 0, 0, 1},
      // lcs a c d: P 3/4, R 3/5
      {"rougeL gapped", MetricKind::RougeL, 0, {"a b c d"}, {{"a x c y d"}}, 0, 0, 2.0 / 3},
      {"rougeL disjoint", MetricKind::RougeL, 0, {"x y"}, {{"a b"}}, 0, 0, 0},
      // ref 1: lcs 1 -> 0.5; ref 2: P 1, R 2/3 -> 0.8
      {"rougeL best of two references", MetricKind::RougeL, 0, {"a b"}, {{"b a"}, {"a b c"}}, 0, 0, 0.8},
      // lcs "the is on the"
      {"rougeL swapped nouns", MetricKind::RougeL, 0, {"the cat is on the mat"}, {{"the mat is on the cat"}}, 0, 0,
       2.0 / 3},
      {"rougeL repeated token", MetricKind::RougeL, 0, {"a a a"}, {{"a"}}, 0, 0, 0.5},
      // bleu
      {"bleu identity corpus", MetricKind::Bleu, 4, {"the cat sat on the mat", "a dog ran to the red door"},
       {{"the cat sat on the mat"}, {"a dog ran to the red door"}}, 0, 0, 1.0},
      {"bleu1 clipped the", MetricKind::Bleu, 1, {"the the the the the the the"}, {{"the cat is on the mat"}}, 0, 0,
       2.0 / 7},
      {"bleu half length", MetricKind::Bleu, 4, {"a b c d"}, {{"a b c d e f g h"}}, 0, 0, std::exp(1.0 - 2.0)},
      {"bleu zero bigram precision", MetricKind::Bleu, 2, {"a b"}, {{"b a"}}, 0, 0, 0},
      {"bleu1 brevity", MetricKind::Bleu, 1, {"a b"}, {{"a b c"}}, 0, 0, std::exp(1.0 - 1.5)},
      {"bleu1 pooled", MetricKind::Bleu, 1, {"a b", "c d"}, {{"a b"}, {"c e"}}, 0, 0, 0.75},
      // p1 3/4, p2 1/2
      {"bleu2 pooled", MetricKind::Bleu, 2, {"a b", "c d"}, {{"a b"}, {"c e"}}, 0, 0, std::sqrt(0.75 * 0.5)},
      {"bleu1 pooled uneven lengths", MetricKind::Bleu, 1, {"a", "b c d e"}, {{"a"}, {"b c d f"}}, 0, 0, 0.8},
      // p 4/5, 3/4, 2/3, 1/2
      {"bleu4 last token wrong", MetricKind::Bleu, 4, {"a b c d e"}, {{"a b c d f"}}, 0, 0, std::pow(0.2, 0.25)},
      {"bleu1 longer candidate", MetricKind::Bleu, 1, {"a b c"}, {{"a b"}}, 0, 0, 2.0 / 3},
  };
  return cases;
}

// Textbook quadratic LCS over the full table, kept separate from the library's.
inline std::size_t lcs_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;)
    for (std::size_t j = b.size(); j-- > 0;)
      t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
  return t[0][0];
}

inline double rouge_l_oracle(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const double l = static_cast<double>(lcs_oracle(cand, ref));
  const double p = l / static_cast<double>(cand.size());
  const double r = l / static_cast<double>(ref.size());
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace actsum::testing
