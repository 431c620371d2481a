#pragma once

#include <span>
#include <string>
#include <vector>

#include "text.hpp"

namespace actsum {

struct RougeScore {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap against each reference; the reference giving the
// highest F1 wins.
RougeScore rouge_n(std::span<const std::string> candidate, std::span<const Tokens> references, int n);
// LCS based F1, maximised over references.
double rouge_l(std::span<const std::string> candidate, std::span<const Tokens> references);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// Corpus BLEU: pooled clipped precisions, uniform weights, no smoothing.
double bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, int max_n);

struct ScoreRow {
  std::string task;
  std::string split;
  double rouge1_recall = 0.0;
  double rouge2_recall = 0.0;
  double rougeL_f1 = 0.0;
  double bleu = 0.0;
  double bleu1 = 0.0;
  std::size_t count = 0;
};

// Averages sentence-level ROUGE over pairs and computes corpus BLEU.
ScoreRow score_corpus(std::span<const Tokens> candidates, std::span<const Tokens> references);

inline constexpr std::string_view kMetricSettings =
    "tokenized lowercase text; rouge-1/2 recall and rouge-l f1 averaged per pair; "
    "corpus bleu (max_n 4) and bleu-1, uniform weights, no smoothing, brevity penalty exp(1-r/c)";

}  // namespace actsum
