#include <doctest.h>

#include <algorithm>
#include <map>

#include "error.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "support/metric_cases.hpp"
#include "synthgen.hpp"

using namespace actsum;

namespace {

std::vector<Tokens> tok_all(const std::vector<std::string>& s) {
  std::vector<Tokens> out;
  for (const auto& x : s) out.push_back(tokenize(x));
  return out;
}

Tokens random_tokens(Rng& r, int max_len, int alphabet) {
  Tokens t(static_cast<std::size_t>(r.integer(0, max_len)));
  for (auto& x : t) x = std::string(1, static_cast<char>('a' + r.integer(0, alphabet - 1)));
  return t;
}

GoldSlots heat_apple() {
  GoldSlots g;
  g.main_action = "heat";
  g.main_object = "apple";
  g.object_count = 1;
  g.places = {"countertop", "microwave", "countertop"};
  g.objects = {"apple"};
  return g;
}

}  // namespace

TEST_CASE("hand-derived metric cases") {
  for (const auto& c : testing::metric_cases()) {
    INFO(c.name);
    const auto cands = tok_all(c.candidates);
    std::vector<Tokens> refs;
    for (const auto& r : c.references) refs.push_back(tokenize(r.at(0)));
    switch (c.kind) {
      case testing::MetricKind::RougeN: {
        const auto s = rouge_n(cands[0], refs, c.n);
        CHECK(std::abs(s.recall - c.recall) <= 1e-9);
        CHECK(std::abs(s.precision - c.precision) <= 1e-9);
        CHECK(std::abs(s.f1 - c.score) <= 1e-9);
        break;
      }
      case testing::MetricKind::RougeL:
        CHECK(std::abs(rouge_l(cands[0], refs) - c.score) <= 1e-9);
        break;
      case testing::MetricKind::Bleu:
        CHECK(std::abs(bleu(cands, refs, c.n) - c.score) <= 1e-9);
        break;
    }
  }
}

TEST_CASE("rouge_l agrees with a table-filling LCS") {
  Rng r(77);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_tokens(r, 12, 5), b = random_tokens(r, 12, 5);
    CHECK(lcs_length(a, b) == testing::lcs_oracle(a, b));
    CHECK(rouge_l(a, std::span<const Tokens>(&b, 1)) == testing::rouge_l_oracle(a, b));
  }
}

TEST_CASE("metric invariants") {
  Rng r(5);
  for (int i = 0; i < 200; ++i) {
    auto c = random_tokens(r, 10, 6);
    if (c.size() < 2) continue;
    const std::vector<Tokens> self = {c};
    CHECK(rouge_n(c, self, 1).f1 == 1.0);
    CHECK(rouge_n(c, self, 2).recall == 1.0);

    // relabel through a bijection of the alphabet
    const auto ref = random_tokens(r, 10, 6);
    const auto relabel = [](Tokens t) {
      for (auto& x : t) x = std::string(1, static_cast<char>('f' - (x[0] - 'a')));
      return t;
    };
    const std::vector<Tokens> refs = {ref}, refs2 = {relabel(ref)};
    const auto c2 = relabel(c);
    CHECK(rouge_n(c, refs, 1).f1 == rouge_n(c2, refs2, 1).f1);
    CHECK(rouge_n(c, refs, 2).recall == rouge_n(c2, refs2, 2).recall);
    CHECK(rouge_l(c, refs) == rouge_l(c2, refs2));
  }

  std::vector<Tokens> cands, refs;
  for (int i = 0; i < 30; ++i) {
    cands.push_back(random_tokens(r, 8, 3));
    refs.push_back(random_tokens(r, 8, 3));
    if (cands.back().empty()) cands.back().push_back("a");
  }
  const double forward = bleu(cands, refs, 2);
  std::reverse(cands.begin(), cands.end());
  std::reverse(refs.begin(), refs.end());
  CHECK(bleu(cands, refs, 2) == doctest::Approx(forward).epsilon(1e-12));
  CHECK_THROWS_AS(bleu({}, {}, 4), DomainError);
  CHECK_THROWS_AS(rouge_n(cands[0], refs, 0), DomainError);
}

TEST_CASE("score rows average sentence scores and pool bleu") {
  const auto cands = tok_all({"the cat", "a b c"});
  const auto refs = tok_all({"the cat sat", "a c b"});
  const auto row = score_corpus(cands, refs);
  CHECK(row.rouge1_recall == doctest::Approx((2.0 / 3 + 1.0) / 2));
  CHECK(row.rougeL_f1 == doctest::Approx((0.8 + 2.0 / 3) / 2));
  CHECK(row.count == 2);
  CHECK(row.bleu1 == doctest::Approx(bleu(cands, refs, 1)));
}

TEST_CASE("error checker on the constructed examples") {
  const auto lx = synth::Lexicon::standard();
  const auto gold = std::optional<GoldSlots>(heat_apple());
  const auto check = [&](const char* s) { return *classify_errors(tokenize(s), gold, lx); };

  CHECK(check("put a heated apple on the counter").no_errors());

  const auto cold = check("put a cold apple on the counter");
  CHECK(cold.action_error);
  CHECK_FALSE(cold.object_error);

  const auto knife = check("put a heated apple and a knife on the counter");
  CHECK(knife.extra_error);
  CHECK_FALSE(knife.action_error);

  const auto wrong_obj = check("put a heated potato on the counter");
  CHECK(wrong_obj.object_error);
  CHECK(wrong_obj.extra_error);

  CHECK(check("put two heated apples on the counter").object_error);
  CHECK(check("put a heated apple on the sofa").place_error);
  CHECK(check("put a heated apple in the microwave").place_error);  // destination never named

  CHECK_FALSE(classify_errors(tokenize("anything"), std::nullopt, lx).has_value());
}

TEST_CASE("error tables report percentages") {
  ErrorInput pddl{"pddl2sum", {}};
  for (int i = 0; i < 49; ++i) pddl.labels.push_back(ErrorLabels{});
  ErrorLabels place;
  place.place_error = true;
  pddl.labels.push_back(place);

  ErrorInput clean{"clean", {ErrorLabels{}, ErrorLabels{}}};

  ErrorLabels both;
  both.action_error = both.object_error = true;
  ErrorInput multi{"multi", {both, ErrorLabels{}, std::nullopt}};

  const std::vector<ErrorInput> rows = {pddl, clean, multi};
  const auto report = error_table(rows);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].no_errors == doctest::Approx(98.0));
  CHECK(report.rows[0].place == doctest::Approx(2.0));
  CHECK(report.rows[0].action == 0.0);
  CHECK(report.rows[1].no_errors == 100.0);
  CHECK(report.rows[1].extra == 0.0);
  CHECK(report.rows[2].action == doctest::Approx(50.0));
  CHECK(report.rows[2].object == doctest::Approx(50.0));
  CHECK(report.rows[2].unavailable == 1);
  CHECK(format_error_report(report).find("pddl2sum") != std::string::npos);
}
