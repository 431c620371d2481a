// Exercises the shared library through its C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "actsum/actsum.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  actsum_free_string(s);
  return out;
}

const char* kSmall = R"({
  "corpus": {"seed": 5, "n_train": 40, "n_valid_seen": 8, "n_valid_unseen": 8, "planted_duplicates": 3,
             "feature_profile": {"channels": 8, "height": 2, "width": 2}},
  "model": {"embed_dim": 8, "hidden_dim": 8, "encoder_layers": 1, "in_channels": 8, "frame_height": 2,
            "frame_width": 2, "conv1_out": 4, "conv2_out": 2},
  "train": {"max_epochs": 2}
})";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("actsum_capi_" + name);
  fs::remove_all(p);
  return p;
}

struct Corpus {
  actsum_corpus* c = nullptr;
  ~Corpus() { actsum_corpus_close(c); }
};

struct Model {
  actsum_model* m = nullptr;
  ~Model() { actsum_model_free(m); }
};

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(actsum_version()).size() > 0);
  CHECK(std::string(actsum_status_name(ACTSUM_OK)) == "ok");
  CHECK(std::string(actsum_status_name(ACTSUM_E_LOAD)) == "load");
  CHECK(std::string(actsum_status_name(static_cast<actsum_status>(99))) == "unknown");
}

TEST_CASE("metrics through the C interface") {
  double r[3];
  REQUIRE(actsum_rouge_n("the cat", "the cat sat", 1, r) == ACTSUM_OK);
  CHECK(std::abs(r[0] - 2.0 / 3) < 1e-12);
  CHECK(r[1] == 1.0);
  double f = -1;
  REQUIRE(actsum_rouge_l("a c b", "a b c", &f) == ACTSUM_OK);
  CHECK(std::abs(f - 2.0 / 3) < 1e-12);
  const char* cands[] = {"a b c d"};
  const char* refs[] = {"a b c d e f g h"};
  double b = 0;
  REQUIRE(actsum_bleu(cands, refs, 1, 4, &b) == ACTSUM_OK);
  CHECK(std::abs(b - std::exp(-1.0)) < 1e-12);
  CHECK(actsum_rouge_n("a", "a", 0, r) == ACTSUM_E_DOMAIN);
  CHECK(actsum_rouge_l(nullptr, "a", &f) == ACTSUM_E_INVALID_ARGUMENT);
  CHECK(std::string(actsum_last_error()).size() > 0);
}

TEST_CASE("config errors surface as domain errors") {
  char* out = nullptr;
  CHECK(actsum_config_resolve(R"({"preset": "nope"})", &out) == ACTSUM_E_DOMAIN);
  CHECK(std::string(actsum_last_error()).find("nope") != std::string::npos);
  CHECK(actsum_config_resolve("{not json", &out) == ACTSUM_E_DOMAIN);
  REQUIRE(actsum_config_resolve(kSmall, &out) == ACTSUM_OK);
  const auto j = json::parse(take(out));
  CHECK(j["corpus"]["n_train"] == 40);
  CHECK(j["model"]["hidden_dim"] == 8);
  CHECK(j["train"]["learning_rate"] == 0.001);
}

TEST_CASE("corpus on disk equals the in-memory corpus") {
  const auto dir = scratch("corpus");
  char* info = nullptr;
  REQUIRE(actsum_corpus_generate(kSmall, dir.c_str(), &info) == ACTSUM_OK);
  const auto gen = json::parse(take(info));
  CHECK(gen["planted_episode_ids"].size() == 3);

  Corpus disk, mem;
  REQUIRE(actsum_corpus_open(dir.c_str(), &disk.c) == ACTSUM_OK);
  REQUIRE(actsum_corpus_synthesize(kSmall, &mem.c) == ACTSUM_OK);
  std::uint64_t a = 0, b = 1;
  actsum_corpus_fingerprint(disk.c, &a);
  actsum_corpus_fingerprint(mem.c, &b);
  CHECK(a == b);

  char* rep = nullptr;
  REQUIRE(actsum_corpus_dedup(disk.c, &rep) == ACTSUM_OK);
  const auto r = json::parse(take(rep));
  const auto removed = r["valid_seen"]["annotations_before"].get<int>() - r["valid_seen"]["annotations_after"].get<int>() +
                       r["valid_unseen"]["annotations_before"].get<int>() -
                       r["valid_unseen"]["annotations_after"].get<int>();
  CHECK(removed == gen["planted_annotations"].get<int>());

  Corpus missing;
  CHECK(actsum_corpus_open((dir / "nowhere").c_str(), &missing.c) == ACTSUM_E_LOAD);
  CHECK(missing.c == nullptr);
}

TEST_CASE("train, save, load and decode") {
  const auto dir = scratch("model");
  fs::create_directories(dir);
  Corpus corpus;
  REQUIRE(actsum_corpus_synthesize(kSmall, &corpus.c) == ACTSUM_OK);
  Model text;
  int lines = 0;
  auto log = [](const char*, void* user) { ++*static_cast<int*>(user); };
  REQUIRE(actsum_model_train(corpus.c, "pddl2sum", kSmall, log, &lines, &text.m) == ACTSUM_OK);
  CHECK(lines >= 2);

  char* info = nullptr;
  REQUIRE(actsum_model_info(text.m, &info) == ACTSUM_OK);
  const auto j = json::parse(take(info));
  CHECK(j["task"] == "pddl2sum");
  CHECK(j["history"].size() == 2);

  const auto path = (dir / "m.ckpt").string();
  REQUIRE(actsum_model_save(text.m, path.c_str()) == ACTSUM_OK);
  Model again;
  REQUIRE(actsum_model_load(path.c_str(), &again.m) == ACTSUM_OK);
  const char* input = "gotolocation shelf pickupobject mug gotolocation desk putobject mug desk";
  char *o1 = nullptr, *o2 = nullptr;
  REQUIRE(actsum_model_decode_text(text.m, input, 1, ACTSUM_DEFAULT_MAX_LEN, &o1) == ACTSUM_OK);
  REQUIRE(actsum_model_decode_text(again.m, input, 1, ACTSUM_DEFAULT_MAX_LEN, &o2) == ACTSUM_OK);
  CHECK(take(o1) == take(o2));
  CHECK(actsum_model_decode_text(text.m, input, 1, 0, &o1) == ACTSUM_E_DOMAIN);

  char* scores = nullptr;
  const auto dump = (dir / "dump.tsv").string();
  REQUIRE(actsum_model_decode_split(text.m, corpus.c, "valid_seen", 1, ACTSUM_DEFAULT_MAX_LEN, dump.c_str(), &scores) ==
          ACTSUM_OK);
  const auto s = json::parse(take(scores));
  char* rescored = nullptr;
  REQUIRE(actsum_score_dump(dump.c_str(), &rescored) == ACTSUM_OK);
  CHECK(json::parse(take(rescored))["rougeL_f1"] == s["rougeL_f1"]);
  char* report = nullptr;
  REQUIRE(actsum_error_report(corpus.c, dump.c_str(), "pddl2sum", &report) == ACTSUM_OK);
  CHECK(take(report).find("pddl2sum") != std::string::npos);

  // oracle pipeline writes its intermediate files
  char* pscores = nullptr;
  REQUIRE(actsum_pipeline_run(nullptr, text.m, corpus.c, "valid_unseen", (dir / "pipe").c_str(), &pscores) == ACTSUM_OK);
  actsum_free_string(pscores);
  CHECK(fs::exists(dir / "pipe" / "plans.tsv"));
  CHECK(fs::exists(dir / "pipe" / "outputs.tsv"));

  Model vision;
  REQUIRE(actsum_model_train(corpus.c, "img2pddl", kSmall, nullptr, nullptr, &vision.m) == ACTSUM_OK);
  CHECK(actsum_model_decode_text(vision.m, input, 1, 5, &o1) == ACTSUM_E_DOMAIN);
  CHECK(actsum_pipeline_run(text.m, text.m, corpus.c, "valid_unseen", (dir / "bad").c_str(), &pscores) ==
        ACTSUM_E_DOMAIN);
  Model bad;
  CHECK(actsum_model_train(corpus.c, "pddl2pddl", kSmall, nullptr, nullptr, &bad.m) == ACTSUM_E_DOMAIN);
}

TEST_CASE("damaged checkpoints are load errors") {
  const auto dir = scratch("damaged");
  fs::create_directories(dir);
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  Model m;
  CHECK(actsum_model_load((dir / "junk.ckpt").c_str(), &m.m) == ACTSUM_E_LOAD);
  CHECK(actsum_model_load((dir / "absent.ckpt").c_str(), &m.m) == ACTSUM_E_IO);
  CHECK(actsum_model_load(nullptr, &m.m) == ACTSUM_E_INVALID_ARGUMENT);
}

TEST_CASE("verification entry points") {
  const char* tiny = R"({"kind": "multimodal", "vocab_size": 9, "embed_dim": 4, "hidden_dim": 4, "encoder_layers": 2,
                         "dropout": 0.0, "in_channels": 3, "frame_height": 2, "frame_width": 2, "conv1_out": 3,
                         "conv2_out": 2})";
  double err = 1;
  REQUIRE(actsum_grad_check(tiny, 0, &err) == ACTSUM_OK);
  CHECK(err < 1e-4);
  std::uint64_t n = 0;
  REQUIRE(actsum_count_parameters(R"({"kind": "vision", "vocab_size": 100, "embed_dim": 512, "hidden_dim": 512,
      "in_channels": 512, "frame_height": 7, "frame_width": 7, "conv1_out": 128, "conv2_out": 32})", &n) == ACTSUM_OK);
  CHECK(n > 1000000);
  CHECK(actsum_count_parameters(R"({"kind": "sideways"})", &n) == ACTSUM_E_DOMAIN);
}
