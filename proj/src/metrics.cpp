#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "error.hpp"

namespace actsum {

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts out;
  const auto len = static_cast<long>(tokens.size());
  for (long i = 0; i + n <= len; ++i)
    ++out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

long total(const NgramCounts& c) {
  long t = 0;
  for (const auto& [_, v] : c) t += v;
  return t;
}

long clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  long m = 0;
  for (const auto& [g, v] : cand)
    if (auto it = ref.find(g); it != ref.end()) m += std::min(v, it->second);
  return m;
}

double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

RougeScore rouge_n(std::span<const std::string> candidate, std::span<const Tokens> references, int n) {
  if (n < 1) throw DomainError("rouge_n: n must be >= 1");
  const auto cand = ngrams(candidate, n);
  const long cand_total = total(cand);
  RougeScore best;
  bool first = true;
  for (const auto& ref_tokens : references) {
    const auto ref = ngrams(ref_tokens, n);
    const long ref_total = total(ref);
    const long m = clipped_overlap(cand, ref);
    RougeScore s;
    s.recall = ref_total > 0 ? static_cast<double>(m) / static_cast<double>(ref_total) : 0.0;
    s.precision = cand_total > 0 ? static_cast<double>(m) / static_cast<double>(cand_total) : 0.0;
    s.f1 = f_measure(s.precision, s.recall);
    if (first || s.f1 > best.f1) best = s;
    first = false;
  }
  return best;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const Tokens> references) {
  double best = 0.0;
  if (candidate.empty()) return 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    const auto l = static_cast<double>(lcs_length(candidate, ref));
    best = std::max(best, f_measure(l / static_cast<double>(candidate.size()), l / static_cast<double>(ref.size())));
  }
  return best;
}

double bleu(std::span<const Tokens> candidates, std::span<const Tokens> references, int max_n) {
  if (candidates.size() != references.size() || candidates.empty())
    throw DomainError("bleu: need equally many candidates and references (at least one)");
  if (max_n < 1) throw DomainError("bleu: max_n must be >= 1");
  std::vector<long> matched(static_cast<std::size_t>(max_n), 0), possible(static_cast<std::size_t>(max_n), 0);
  long c = 0, r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += static_cast<long>(candidates[i].size());
    r += static_cast<long>(references[i].size());
    for (int n = 1; n <= max_n; ++n) {
      const auto cand = ngrams(candidates[i], n);
      matched[static_cast<std::size_t>(n - 1)] += clipped_overlap(cand, ngrams(references[i], n));
      possible[static_cast<std::size_t>(n - 1)] += total(cand);
    }
  }
  double log_sum = 0.0;
  for (int n = 0; n < max_n; ++n) {
    const auto m = matched[static_cast<std::size_t>(n)], p = possible[static_cast<std::size_t>(n)];
    if (m == 0 || p == 0) return 0.0;
    log_sum += std::log(static_cast<double>(m) / static_cast<double>(p));
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return bp * std::exp(log_sum / max_n);
}

ScoreRow score_corpus(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  if (candidates.size() != references.size()) throw DomainError("score: candidate/reference count mismatch");
  ScoreRow row;
  row.count = candidates.size();
  if (candidates.empty()) return row;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::span<const Tokens> ref(&references[i], 1);
    row.rouge1_recall += rouge_n(candidates[i], ref, 1).recall;
    row.rouge2_recall += rouge_n(candidates[i], ref, 2).recall;
    row.rougeL_f1 += rouge_l(candidates[i], ref);
  }
  const auto n = static_cast<double>(candidates.size());
  row.rouge1_recall /= n;
  row.rouge2_recall /= n;
  row.rougeL_f1 /= n;
  row.bleu = bleu(candidates, references, 4);
  row.bleu1 = bleu(candidates, references, 1);
  return row;
}

}  // namespace actsum
