// Command-line front end. Talks to the library only through the C API.
#include <sys/file.h>
#include <unistd.h>
#include <fcntl.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "actsum/actsum.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunError {
  actsum_status status;
  std::string message;
};

void check(actsum_status s) {
  if (s != ACTSUM_OK) throw RunError{s, actsum_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  actsum_free_string(s);
  return out;
}

void log_line(const char* line, void*) { std::fprintf(stderr, "[actsum] %s\n", line); }

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError{ACTSUM_E_IO, "cannot hash " + path.string()};
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// Exclusive lock on an output directory, released when the process exits.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fs::create_directories(dir);
    const auto path = dir / ".actsum.lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw RunError{ACTSUM_E_IO, "cannot create lock file " + path.string()};
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw RunError{ACTSUM_E_IO, "output directory " + dir.string() + " is in use by another actsum process"};
    }
  }
  ~DirLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  int fd_ = -1;
};

class Corpus {
 public:
  explicit Corpus(const std::string& dir) { check(actsum_corpus_open(dir.c_str(), &c_)); }
  explicit Corpus(const json& config) { check(actsum_corpus_synthesize(config.dump().c_str(), &c_)); }
  ~Corpus() { actsum_corpus_close(c_); }
  Corpus(const Corpus&) = delete;
  Corpus& operator=(const Corpus&) = delete;
  actsum_corpus* get() const { return c_; }
  std::string fingerprint() const {
    std::uint64_t f = 0;
    check(actsum_corpus_fingerprint(c_, &f));
    return std::to_string(f);
  }

 private:
  actsum_corpus* c_ = nullptr;
};

class Model {
 public:
  explicit Model(actsum_model* m) : m_(m) {}
  explicit Model(const std::string& path) { check(actsum_model_load(path.c_str(), &m_)); }
  ~Model() { actsum_model_free(m_); }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  actsum_model* get() const { return m_; }

 private:
  actsum_model* m_ = nullptr;
};

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = nullptr;
  std::optional<std::uint64_t> seed;
  json inputs = json::object();
  json outputs = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input_file(const std::string& name, const fs::path& p) { inputs[name] = {{"path", p.string()}, {"sha256", sha256_file(p)}}; }
  void input_corpus(const std::string& name, const std::string& dir, const Corpus& c) {
    inputs[name] = {{"path", dir}, {"fingerprint", c.fingerprint()}};
  }
  void input_corpus(const std::string& name, const std::string& dir, const Corpus& c, const json& cfg) {
    if (!dir.empty()) return input_corpus(name, dir, c);
    inputs[name] = {{"synthesized", cfg.at("corpus")}, {"fingerprint", c.fingerprint()}};
  }
  void output_file(const fs::path& p) { outputs[p.filename().string()] = {{"path", p.string()}, {"sha256", sha256_file(p)}}; }

  // Written last, through a rename, so a manifest only exists for finished runs.
  void write(const fs::path& path) const {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json j{{"command", command},
           {"argv", argv},
           {"config", config},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"code_version", actsum_version()},
           {"inputs", inputs},
           {"outputs", outputs},
           {"wall_clock_seconds", secs}};
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) throw RunError{ACTSUM_E_IO, "cannot write " + tmp};
      out << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
  }
};

json resolve(const std::string& config_path, json patch) {
  json doc = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw RunError{ACTSUM_E_IO, "cannot open config " + config_path};
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw RunError{ACTSUM_E_DOMAIN, "config " + config_path + ": " + e.what()};
    }
  }
  doc.merge_patch(patch);
  char* out = nullptr;
  check(actsum_config_resolve(doc.dump().c_str(), &out));
  return json::parse(take(out));
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw RunError{ACTSUM_E_IO, "cannot write " + p.string()};
  out << text;
}

// A corpus directory, or the synthetic corpus described by the config.
std::unique_ptr<Corpus> corpus_for(const std::string& dir, const json& cfg) {
  if (!dir.empty()) return std::make_unique<Corpus>(dir);
  std::fprintf(stderr, "[actsum] no --splits given; synthesizing the configured corpus in memory\n");
  return std::make_unique<Corpus>(cfg);
}

std::string format_scores(const std::string& json_text) {
  const auto j = json::parse(json_text);
  char buf[256];
  std::snprintf(buf, sizeof buf, "R-1 %.4f  R-2 %.4f  R-L %.4f  BLEU %.4f  BLEU-1 %.4f  (n=%zu)\n",
                j.at("rouge1_recall").get<double>(), j.at("rouge2_recall").get<double>(),
                j.at("rougeL_f1").get<double>(), j.at("bleu").get<double>(), j.at("bleu1").get<double>(),
                j.at("count").get<std::size_t>());
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot action summarization toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  if (const char* env = std::getenv("ACTSUM_CONFIG")) config_path = env;
  app.add_option("--config", config_path, "JSON config file (default: $ACTSUM_CONFIG)");
  std::vector<std::string> args(argv, argv + argc);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<int> gen_planted;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--planted-duplicates", gen_planted, "Validation episodes that copy a train plan");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a converted corpus and write a normalized copy");
  std::string ingest_in, ingest_out;
  ingest->add_option("--splits", ingest_in, "Split directory")->required();
  ingest->add_option("--out", ingest_out, "Output directory")->required();

  // dedup
  auto* dedup = app.add_subcommand("dedup", "Remove validation plans that also occur in train");
  std::string dedup_in, dedup_out;
  dedup->add_option("--splits", dedup_in, "Split directory")->required();
  dedup->add_option("--out", dedup_out, "Write the deduplicated corpus here");

  // train
  auto* train = app.add_subcommand("train", "Train one task model");
  std::string train_task, train_splits, train_out;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_epochs;
  bool train_no_dedup = false;
  train->add_option("--task", train_task, "Task name, e.g. pddl2sum or img2pddl")->required();
  train->add_option("--splits", train_splits, "Split directory (default: synthesize from the config)");
  train->add_option("--out", train_out, "Checkpoint path")->required();
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--epochs", train_epochs, "Maximum epochs");
  train->add_flag("--no-dedup", train_no_dedup, "Skip validation dedup before training");

  // decode
  auto* dec = app.add_subcommand("decode", "Decode text or a corpus split with a checkpoint");
  std::string dec_model, dec_text, dec_splits, dec_split = "valid_seen", dec_out;
  int dec_beam = 1;
  int dec_max_len = ACTSUM_DEFAULT_MAX_LEN;
  dec->add_option("--model", dec_model, "Checkpoint")->required();
  auto* dec_text_opt = dec->add_option("--text", dec_text, "Input text for text models");
  auto* dec_splits_opt = dec->add_option("--splits", dec_splits, "Split directory");
  dec->add_option("--split", dec_split, "Split to decode");
  dec->add_option("--out", dec_out, "Dump TSV for split decoding");
  dec->add_option("--beam", dec_beam, "Beam width (1 = greedy)");
  dec->add_option("--max-len", dec_max_len, "Maximum output length");
  dec_text_opt->excludes(dec_splits_opt);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Frames -> plan -> text");
  std::string pipe_vision, pipe_text, pipe_splits, pipe_split = "valid_unseen", pipe_out;
  bool pipe_oracle = false;
  auto* pv = pipe->add_option("--vision", pipe_vision, "Stage-1 checkpoint (img2pddl or img2act)");
  auto* po = pipe->add_flag("--oracle", pipe_oracle, "Use gold plans for stage 1");
  pv->excludes(po);
  pipe->add_option("--text", pipe_text, "Stage-2 checkpoint")->required();
  pipe->add_option("--splits", pipe_splits, "Split directory")->required();
  pipe->add_option("--split", pipe_split, "Split");
  pipe->add_option("--out", pipe_out, "Output directory")->required();

  // matrix
  auto* mat = app.add_subcommand("matrix", "Run the experiment matrix");
  std::string mat_splits, mat_out = "runs/matrix";
  std::vector<std::string> mat_rows;
  std::optional<std::uint64_t> mat_seed;
  bool mat_no_dedup = false;
  mat->add_option("--splits", mat_splits, "Split directory (default: synthesize from the config)");
  mat->add_option("--out", mat_out, "Output directory");
  mat->add_option("--rows", mat_rows, "Subset of task rows");
  mat->add_option("--seed", mat_seed, "Training seed");
  mat->add_flag("--no-dedup", mat_no_dedup, "Skip validation dedup");

  // score
  auto* score = app.add_subcommand("score", "Score a decode dump");
  std::string score_dump;
  score->add_option("--dump", score_dump, "Dump TSV")->required();

  // error-report
  auto* err = app.add_subcommand("error-report", "Error taxonomy for summary dumps");
  std::string err_splits, err_label = "summaries";
  std::vector<std::string> err_dumps;
  err->add_option("--splits", err_splits, "Split directory with gold slots")->required();
  err->add_option("--dump", err_dumps, "Dump TSV (repeatable)")->required();
  err->add_option("--label", err_label, "Row label when a single dump is given");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Manifest manifest;
    manifest.argv = args;

    if (*gen) {
      json patch = json::object();
      if (gen_seed) patch["corpus"]["seed"] = *gen_seed;
      if (gen_planted) patch["corpus"]["planted_duplicates"] = *gen_planted;
      const auto cfg = resolve(config_path, patch);
      DirLock lock(gen_out);
      char* info = nullptr;
      check(actsum_corpus_generate(cfg.dump().c_str(), gen_out.c_str(), &info));
      const auto info_text = take(info);
      write_text(fs::path(gen_out) / "generation.json", info_text + "\n");
      manifest.command = "gen-corpus";
      manifest.config = cfg;
      manifest.seed = cfg.at("corpus").at("seed").get<std::uint64_t>();
      Corpus c(gen_out);
      manifest.outputs["corpus"] = {{"path", gen_out}, {"fingerprint", c.fingerprint()}};
      manifest.write(fs::path(gen_out) / "manifest.json");
      char* stats = nullptr;
      check(actsum_corpus_stats(c.get(), &stats));
      std::cout << take(stats) << "\n";
    } else if (*ingest) {
      Corpus c(ingest_in);
      DirLock lock(ingest_out);
      check(actsum_corpus_write(c.get(), ingest_out.c_str()));
      manifest.command = "ingest";
      manifest.input_corpus("splits", ingest_in, c);
      Corpus written(ingest_out);
      manifest.outputs["corpus"] = {{"path", ingest_out}, {"fingerprint", written.fingerprint()}};
      manifest.write(fs::path(ingest_out) / "manifest.json");
      char* stats = nullptr;
      check(actsum_corpus_stats(written.get(), &stats));
      std::cout << take(stats) << "\n";
    } else if (*dedup) {
      Corpus c(dedup_in);
      manifest.command = "dedup";
      manifest.input_corpus("splits", dedup_in, c);
      char* report = nullptr;
      check(actsum_corpus_dedup(c.get(), &report));
      const auto r = json::parse(take(report));
      std::cout << "valid_seen " << r["valid_seen"]["annotations_before"] << "→"
                << r["valid_seen"]["annotations_after"] << ", valid_unseen " << r["valid_unseen"]["annotations_before"]
                << "→" << r["valid_unseen"]["annotations_after"] << "\n";
      std::fprintf(stderr, "[actsum] dedup key: %s; granularity: %s\n", r["key"].get<std::string>().c_str(),
                   r["granularity"].get<std::string>().c_str());
      if (!dedup_out.empty()) {
        DirLock lock(dedup_out);
        check(actsum_corpus_write(c.get(), dedup_out.c_str()));
        write_text(fs::path(dedup_out) / "dedup_report.json", r.dump(2) + "\n");
        manifest.outputs["corpus"] = {{"path", dedup_out}, {"fingerprint", c.fingerprint()}};
        manifest.output_file(fs::path(dedup_out) / "dedup_report.json");
        manifest.write(fs::path(dedup_out) / "manifest.json");
      }
    } else if (*train) {
      json patch = json::object();
      if (train_seed) patch["train"]["seed"] = *train_seed;
      if (train_epochs) patch["train"]["max_epochs"] = *train_epochs;
      const auto cfg = resolve(config_path, patch);
      const fs::path out = train_out;
      const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
      DirLock lock(dir);
      auto corpus = corpus_for(train_splits, cfg);
      Corpus& c = *corpus;
      manifest.input_corpus("splits", train_splits, c, cfg);
      if (!train_no_dedup) {
        char* report = nullptr;
        check(actsum_corpus_dedup(c.get(), &report));
        manifest.inputs["dedup"] = json::parse(take(report));
      }
      actsum_model* raw = nullptr;
      check(actsum_model_train(c.get(), train_task.c_str(), cfg.dump().c_str(), log_line, nullptr, &raw));
      Model m(raw);
      check(actsum_model_save(m.get(), out.c_str()));
      manifest.command = "train";
      manifest.config = cfg;
      manifest.seed = cfg.at("train").at("seed").get<std::uint64_t>();
      manifest.output_file(out);
      manifest.write(out.string() + ".manifest.json");
      char* info = nullptr;
      check(actsum_model_info(m.get(), &info));
      const auto j = json::parse(take(info));
      std::cout << "task " << j["task"].get<std::string>() << ": " << j["parameters"] << " parameters, best epoch "
                << j["best_epoch"] << ", checkpoint " << out.string() << "\n";
    } else if (*dec) {
      Model m(dec_model);
      if (!dec_text.empty()) {
        char* out = nullptr;
        check(actsum_model_decode_text(m.get(), dec_text.c_str(), dec_beam, dec_max_len, &out));
        std::cout << take(out) << "\n";
      } else {
        if (dec_splits.empty() || dec_out.empty())
          throw RunError{ACTSUM_E_INVALID_ARGUMENT, "decode needs --text, or --splits with --out"};
        const fs::path out = dec_out;
        DirLock lock(out.has_parent_path() ? out.parent_path() : fs::path("."));
        Corpus c(dec_splits);
        char* scores = nullptr;
        check(actsum_model_decode_split(m.get(), c.get(), dec_split.c_str(), dec_beam, dec_max_len, out.c_str(), &scores));
        manifest.command = "decode";
        manifest.input_file("model", dec_model);
        manifest.input_corpus("splits", dec_splits, c);
        manifest.output_file(out);
        manifest.write(out.string() + ".manifest.json");
        std::cout << format_scores(take(scores));
      }
    } else if (*pipe) {
      if (pipe_vision.empty() && !pipe_oracle) throw RunError{ACTSUM_E_INVALID_ARGUMENT, "pipeline needs --vision or --oracle"};
      DirLock lock(pipe_out);
      Corpus c(pipe_splits);
      std::optional<Model> vision;
      if (!pipe_vision.empty()) vision.emplace(pipe_vision);
      Model text(pipe_text);
      char* scores = nullptr;
      check(actsum_pipeline_run(vision ? vision->get() : nullptr, text.get(), c.get(), pipe_split.c_str(),
                                pipe_out.c_str(), &scores));
      manifest.command = "pipeline";
      if (vision) manifest.input_file("vision", pipe_vision);
      manifest.input_file("text", pipe_text);
      manifest.input_corpus("splits", pipe_splits, c);
      manifest.output_file(fs::path(pipe_out) / "plans.tsv");
      manifest.output_file(fs::path(pipe_out) / "outputs.tsv");
      manifest.write(fs::path(pipe_out) / "manifest.json");
      std::cout << format_scores(take(scores));
    } else if (*mat) {
      json patch = json::object();
      if (mat_seed) patch["train"]["seed"] = *mat_seed;
      if (!mat_rows.empty()) patch["matrix"]["rows"] = mat_rows;
      const auto cfg = resolve(config_path, patch);
      DirLock lock(mat_out);
      auto corpus = corpus_for(mat_splits, cfg);
      manifest.input_corpus("splits", mat_splits, *corpus, cfg);
      if (!mat_no_dedup) {
        char* report = nullptr;
        check(actsum_corpus_dedup(corpus->get(), &report));
        const auto r = json::parse(take(report));
        manifest.inputs["dedup"] = r;
        std::fprintf(stderr, "[actsum] dedup: valid_seen %zu->%zu, valid_unseen %zu->%zu annotations\n",
                     r["valid_seen"]["annotations_before"].get<std::size_t>(),
                     r["valid_seen"]["annotations_after"].get<std::size_t>(),
                     r["valid_unseen"]["annotations_before"].get<std::size_t>(),
                     r["valid_unseen"]["annotations_after"].get<std::size_t>());
      }
      char* table = nullptr;
      check(actsum_matrix_run(corpus->get(), cfg.dump().c_str(), mat_out.c_str(), log_line, nullptr, &table));
      manifest.command = "matrix";
      manifest.config = cfg;
      manifest.seed = cfg.at("train").at("seed").get<std::uint64_t>();
      for (const char* f : {"scores.tsv", "scores.txt", "errors.tsv"}) manifest.output_file(fs::path(mat_out) / f);
      manifest.write(fs::path(mat_out) / "manifest.json");
      std::cout << take(table);
    } else if (*score) {
      char* scores = nullptr;
      check(actsum_score_dump(score_dump.c_str(), &scores));
      std::cout << format_scores(take(scores));
    } else if (*err) {
      Corpus c(err_splits);
      for (const auto& d : err_dumps) {
        char* report = nullptr;
        const std::string label = err_dumps.size() == 1 ? err_label : fs::path(d).parent_path().filename().string();
        check(actsum_error_report(c.get(), d.c_str(), label.c_str(), &report));
        std::cout << take(report);
      }
    }
    return 0;
  } catch (const RunError& e) {
    std::fprintf(stderr, "error: code=%s message=%s\n", actsum_status_name(e.status), json(e.message).dump().c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: code=internal message=%s\n", json(std::string(e.what())).dump().c_str());
    return 1;
  }
}
