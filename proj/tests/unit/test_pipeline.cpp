#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "config.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "synthgen.hpp"

using namespace actsum;
namespace fs = std::filesystem;

namespace {

synth::GenConfig tiny_corpus() {
  auto c = synth::desk_config();
  c.seed = 12;
  c.n_train = 40;
  c.n_valid_seen = 8;
  c.n_valid_unseen = 8;
  c.feature_profile = {8, 2, 2, 0.1};
  return c;
}

MatrixConfig tiny_matrix(const fs::path& out) {
  MatrixConfig m;
  m.model.net = {8, 8, 1, true, 0.0, "dot"};
  m.model.vision = {8, 2, 2, 4, 2, 1};
  m.train.max_epochs = 2;
  m.train.batch_size = 16;
  m.output_dir = out;
  return m;
}

const SplitSet& corpus() {
  static const SplitSet s = dedup_validation(synth::generate_splits(tiny_corpus())).splits;
  return s;
}

std::vector<std::string> outputs(const std::vector<PipelineItem>& items) {
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(join(i.output));
  return out;
}

}  // namespace

TEST_CASE("oracle first stage reproduces the direct route") {
  const auto dir = fs::temp_directory_path() / "actsum_unit_pipe";
  fs::remove_all(dir);
  auto cfg = tiny_matrix(dir);
  const auto text = obtain_checkpoint("pddl2sum", cfg, corpus());
  const auto& eps = corpus().valid_unseen;
  const auto direct = run_direct(text, eps, TargetKind::Summary);
  const auto oracle = run_pipeline(nullptr, text, eps, TargetKind::Summary, dir / "plans.tsv");
  CHECK(!direct.empty());
  CHECK(outputs(direct) == outputs(oracle));
  // intermediate plans are written out and can be read back
  const auto plans = GenerationSource::load(dir / "plans.tsv");
  CHECK(plans.plans.size() == eps.size());
  CHECK(run_pipeline(nullptr, text, {}, TargetKind::Summary).empty());
}

TEST_CASE("stage kinds must line up") {
  const auto dir = fs::temp_directory_path() / "actsum_unit_pipe_kinds";
  fs::remove_all(dir);
  auto cfg = tiny_matrix(dir);
  const auto text = obtain_checkpoint("pddl2sum", cfg, corpus());
  const auto vision = obtain_checkpoint("img2act", cfg, corpus());
  const auto& eps = corpus().valid_seen;
  CHECK_THROWS_AS(run_pipeline(&text, text, eps, TargetKind::Summary), DomainError);
  CHECK_THROWS_AS(run_pipeline(&vision, text, eps, TargetKind::Summary), DomainError);
  const auto act_text = obtain_checkpoint("act2sum", cfg, corpus());
  const auto items = run_pipeline(&vision, act_text, eps, TargetKind::Summary);
  CHECK(items.size() == annotation_count(eps));
  CHECK_THROWS_AS(run_pipeline(&vision, act_text, eps, TargetKind::Pddl), DomainError);
}

TEST_CASE("checkpoints are cached by config and corpus") {
  const auto dir = fs::temp_directory_path() / "actsum_unit_cache";
  fs::remove_all(dir);
  auto cfg = tiny_matrix(dir);
  const auto a = obtain_checkpoint("pddl2sum", cfg, corpus());
  const auto stamp = fs::last_write_time(dir / "checkpoints" / "pddl2sum.ckpt");
  const auto b = obtain_checkpoint("pddl2sum", cfg, corpus());
  CHECK(fs::last_write_time(dir / "checkpoints" / "pddl2sum.ckpt") == stamp);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  cfg.train.seed = 99;
  const auto c = obtain_checkpoint("pddl2sum", cfg, corpus());
  CHECK(serialize_checkpoint(a) != serialize_checkpoint(c));
}

TEST_CASE("a small matrix fills every row and reruns identically") {
  const auto dir = fs::temp_directory_path() / "actsum_unit_matrix";
  fs::remove_all(dir);
  auto cfg = tiny_matrix(dir);
  cfg.rows = {"pddl2sum", "img2pddl", "genpddl2sum", "imgpddl2inst", "act2inst"};
  cfg.overrides["act2inst"] = nlohmann::json{{"train", {{"patience", 0}}}};
  const auto lx = synth::Lexicon::standard();
  const auto t1 = run_matrix(cfg, corpus(), lx);
  REQUIRE(t1.rows.size() == 5);
  for (const auto* name : {"pddl2sum", "img2pddl", "genpddl2sum", "imgpddl2inst"}) {
    const auto* row = t1.find(name);
    REQUIRE(row);
    CHECK(row->error.empty());
    CHECK(row->seen.has_value());
    CHECK(row->unseen.has_value());
    CHECK(fs::exists(dir / name / "valid_seen.tsv"));
  }
  // bad override fails that row only
  CHECK_FALSE(t1.find("act2inst")->error.empty());
  CHECK(t1.find("pddl2sum")->seen_errors.has_value());
  CHECK_FALSE(t1.find("img2pddl")->seen_errors.has_value());
  CHECK(fs::exists(dir / "genpddl2sum" / "plans_valid_unseen.tsv"));

  // header plus one line per row, task + split columns around 10 scores
  std::istringstream tsv(t1.tsv());
  std::string line;
  std::getline(tsv, line);
  CHECK(std::count(line.begin(), line.end(), '\t') >= 10);

  const auto t2 = run_matrix(cfg, corpus(), lx);
  CHECK(t1.tsv() == t2.tsv());
  CHECK(t1.format() == t2.format());
}

TEST_CASE("reference values follow the paper table") {
  const auto& names = matrix_task_names();
  REQUIRE(names.size() == 16);
  CHECK(names.front() == "pddl2sum");
  const auto r = reference_scores("pddl2sum");
  REQUIRE(r.has_value());
  CHECK(r->seen[0] == doctest::Approx(0.628));
  CHECK(reference_scores("img2sum")->seen[0] == doctest::Approx(0.582));
  CHECK(reference_scores("img2pddl")->seen[0] == doctest::Approx(0.923));
  CHECK(reference_no_errors("img2sum") == doctest::Approx(38.0));
  CHECK_FALSE(reference_scores("bogus").has_value());
}

TEST_CASE("config presets and overrides resolve") {
  const auto desk = resolve_config(nlohmann::json::object());
  CHECK(desk.preset == "desk");
  CHECK(desk.model.net.hidden_dim == 64);
  const auto paper = resolve_config(nlohmann::json{{"preset", "paper"}, {"train", {{"seed", 7}}}});
  CHECK(paper.model.net.hidden_dim == 512);
  CHECK(paper.corpus.feature_profile.channels == 512);
  CHECK(paper.train.seed == 7);
  CHECK_THROWS_AS(resolve_config(nlohmann::json{{"preset", "huge"}}), DomainError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json{{"train", {{"learnin_rate", 1}}}}), DomainError);
  // a resolved config resolves to itself
  CHECK(to_json(resolve_config(to_json(paper))) == to_json(paper));
}
