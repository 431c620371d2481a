#include "actsum/actsum.h"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "config.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "synthgen.hpp"
#include "train.hpp"

using namespace actsum;
using nlohmann::json;
namespace fs = std::filesystem;

struct actsum_corpus {
  SplitSet splits;
};

struct actsum_model {
  Checkpoint ckpt;
};

namespace {

thread_local std::string last_error;

actsum_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return ACTSUM_E_INVALID_ARGUMENT;
    case ErrorCode::Domain: return ACTSUM_E_DOMAIN;
    case ErrorCode::Load: return ACTSUM_E_LOAD;
    case ErrorCode::Io: return ACTSUM_E_IO;
    case ErrorCode::Numeric: return ACTSUM_E_NUMERIC;
    case ErrorCode::Internal: return ACTSUM_E_INTERNAL;
  }
  return ACTSUM_E_INTERNAL;
}

template <typename F>
actsum_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return ACTSUM_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const fs::filesystem_error& e) {
    last_error = e.what();
    return ACTSUM_E_IO;
  } catch (const json::exception& e) {
    last_error = e.what();
    return ACTSUM_E_DOMAIN;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return ACTSUM_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ACTSUM_E_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

RunConfig config_from(const char* text) {
  if (!text || !*text) return resolve_config(json::object());
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DomainError(std::string("config is not valid JSON: ") + e.what());
  }
  return resolve_config(doc);
}

json score_json(const ScoreRow& s) {
  return {{"rouge1_recall", s.rouge1_recall}, {"rouge2_recall", s.rouge2_recall}, {"rougeL_f1", s.rougeL_f1},
          {"bleu", s.bleu},   {"bleu1", s.bleu1},   {"count", s.count},   {"settings", std::string(kMetricSettings)}};
}

ScoreRow score_items(const std::vector<PipelineItem>& items) {
  std::vector<Tokens> c, r;
  for (const auto& it : items) {
    c.push_back(it.output);
    r.push_back(it.reference);
  }
  return score_corpus(c, r);
}

void write_items(const fs::path& path, const std::vector<PipelineItem>& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "episode_id\tannotator_id\tinput\tgenerated\treference\n";
  for (const auto& it : items)
    out << it.episode_id << '\t' << it.annotator_id << '\t' << join(it.plan, " ") << '\t' << join(it.output, " ")
        << '\t' << join(it.reference, " ") << '\n';
}

struct DumpRow {
  std::string episode_id;
  Tokens generated;
  Tokens reference;
};

std::vector<DumpRow> read_dump(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("episode_id\t", 0) != 0)
    throw LoadError(path.string() + ": missing dump header");
  std::vector<DumpRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (line.back() == '\t') cols.push_back("");
    if (cols.size() != 5) throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    rows.push_back({cols[0], tokenize(cols[3]), tokenize(cols[4])});
  }
  return rows;
}

Split split_arg(const char* name) {
  require(name != nullptr, "split is null");
  const auto s = parse_split(name);
  if (!s) throw DomainError(std::string("unknown split '") + name + "' (train, valid_seen, valid_unseen)");
  return *s;
}

int max_len_arg(int max_len) {
  if (max_len == ACTSUM_DEFAULT_MAX_LEN) return 0;
  if (max_len < 1) throw DomainError("max_len must be >= 1");
  return max_len;
}

json dedup_json(const DedupReport& r) {
  const auto side = [](const DedupSplitReport& s) {
    return json{{"annotations_before", s.annotations_before},
                {"annotations_after", s.annotations_after},
                {"episodes_before", s.episodes_before},
                {"episodes_after", s.episodes_after}};
  };
  return {{"valid_seen", side(r.valid_seen)},
          {"valid_unseen", side(r.valid_unseen)},
          {"key", r.key},
          {"granularity", r.granularity}};
}

}  // namespace

extern "C" {

const char* actsum_version(void) { return "0.1.0"; }

const char* actsum_status_name(actsum_status status) {
  switch (status) {
    case ACTSUM_OK: return "ok";
    case ACTSUM_E_INVALID_ARGUMENT: return "invalid_argument";
    case ACTSUM_E_DOMAIN: return "domain";
    case ACTSUM_E_LOAD: return "load";
    case ACTSUM_E_IO: return "io";
    case ACTSUM_E_NUMERIC: return "numeric";
    case ACTSUM_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* actsum_last_error(void) { return last_error.c_str(); }

void actsum_free_string(char* s) { std::free(s); }

actsum_status actsum_config_resolve(const char* config_json, char** resolved_json) {
  return guarded([&] {
    require(resolved_json != nullptr, "resolved_json is null");
    *resolved_json = dup(to_json(config_from(config_json)).dump(2));
  });
}

actsum_status actsum_corpus_generate(const char* config_json, const char* out_dir, char** info_json) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir is null");
    const auto cfg = config_from(config_json);
    const auto info = synth::generate_corpus(cfg.corpus, out_dir);
    if (info_json) {
      json j{{"planted_episode_ids", info.planted_episode_ids},
             {"planted_annotations", info.planted_annotations},
             {"n_train", cfg.corpus.n_train},
             {"n_valid_seen", cfg.corpus.n_valid_seen},
             {"n_valid_unseen", cfg.corpus.n_valid_unseen}};
      *info_json = dup(j.dump(2));
    }
  });
}

actsum_status actsum_corpus_synthesize(const char* config_json, actsum_corpus** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    const auto cfg = config_from(config_json);
    auto c = std::make_unique<actsum_corpus>();
    c->splits = synth::generate_splits(cfg.corpus);
    *out = c.release();
  });
}

actsum_status actsum_corpus_open(const char* dir, actsum_corpus** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "dir and out must be non-null");
    auto c = std::make_unique<actsum_corpus>();
    c->splits = load_splits(dir);
    *out = c.release();
  });
}

void actsum_corpus_close(actsum_corpus* corpus) { delete corpus; }

actsum_status actsum_corpus_stats(const actsum_corpus* corpus, char** stats_json) {
  return guarded([&] {
    require(corpus && stats_json, "corpus and stats_json must be non-null");
    json j = json::object();
    for (auto s : {Split::Train, Split::ValidSeen, Split::ValidUnseen}) {
      const auto& eps = corpus->splits.get(s);
      std::map<std::string, int> envs;
      for (const auto& e : eps) ++envs[e->environment_id];
      j[std::string(to_string(s))] = {{"episodes", eps.size()},
                                      {"annotations", annotation_count(eps)},
                                      {"environments", envs.size()}};
    }
    j["fingerprint"] = std::to_string(corpus_fingerprint(corpus->splits));
    *stats_json = dup(j.dump(2));
  });
}

actsum_status actsum_corpus_dedup(actsum_corpus* corpus, char** report_json) {
  return guarded([&] {
    require(corpus != nullptr, "corpus is null");
    auto result = dedup_validation(corpus->splits);
    corpus->splits = std::move(result.splits);
    if (report_json) *report_json = dup(dedup_json(result.report).dump(2));
  });
}

actsum_status actsum_corpus_write(const actsum_corpus* corpus, const char* dir) {
  return guarded([&] {
    require(corpus && dir, "corpus and dir must be non-null");
    write_splits(corpus->splits, dir);
  });
}

actsum_status actsum_corpus_fingerprint(const actsum_corpus* corpus, uint64_t* out) {
  return guarded([&] {
    require(corpus && out, "corpus and out must be non-null");
    *out = corpus_fingerprint(corpus->splits);
  });
}

actsum_status actsum_model_train(const actsum_corpus* corpus, const char* task, const char* config_json,
                                 actsum_log_fn log, void* user, actsum_model** out) {
  return guarded([&] {
    require(corpus && task && out, "corpus, task and out must be non-null");
    const auto cfg = config_from(config_json);
    const auto mc = matrix_config(cfg, {});
    LogFn fn;
    if (log) fn = [log, user](const std::string& line) { log(line.c_str(), user); };
    auto m = std::make_unique<actsum_model>();
    m->ckpt = obtain_checkpoint(task, mc, corpus->splits, fn);
    *out = m.release();
  });
}

actsum_status actsum_model_load(const char* path, actsum_model** out) {
  return guarded([&] {
    require(path && out, "path and out must be non-null");
    auto m = std::make_unique<actsum_model>();
    m->ckpt = load_checkpoint(path);
    *out = m.release();
  });
}

actsum_status actsum_model_save(const actsum_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path must be non-null");
    save_checkpoint(model->ckpt, path);
  });
}

void actsum_model_free(actsum_model* model) { delete model; }

actsum_status actsum_model_info(const actsum_model* model, char** info_json) {
  return guarded([&] {
    require(model && info_json, "model and info_json must be non-null");
    const auto& c = model->ckpt;
    json history = json::array();
    for (const auto& h : c.history)
      history.push_back({{"epoch", h.epoch},
                         {"train_loss", h.train_loss},
                         {"train_token_accuracy", h.train_token_accuracy},
                         {"valid_rouge_l", h.valid_rouge_l}});
    json j{{"task", c.task},
           {"kind", std::string(to_string(c.config().kind))},
           {"model", to_json(c.config())},
           {"train", to_json(c.train)},
           {"collapse_runs", c.render.collapse_runs},
           {"vocab_size", c.vocab.size()},
           {"parameters", count_parameters(c.config())},
           {"bridge_in", c.config().bridge_in()},
           {"output_in", c.config().output_in()},
           {"best_epoch", c.best_epoch},
           {"max_target_len", c.max_target_len},
           {"history", history}};
    *info_json = dup(j.dump(2));
  });
}

actsum_status actsum_model_decode_text(const actsum_model* model, const char* input, int beam, int max_len,
                                       char** output) {
  return guarded([&] {
    require(model && input && output, "model, input and output must be non-null");
    if (model->ckpt.config().kind != ModelKind::Text)
      throw DomainError("missing modality: " + model->ckpt.task + " needs frames; decode it over a corpus split");
    auto opts = default_decode_options(model->ckpt);
    opts.beam = beam;
    if (const int m = max_len_arg(max_len)) opts.max_len = m;
    Pair p{tokenize(input), nullptr, {}, "", ""};
    *output = dup(join(decode(model->ckpt, p, opts), " "));
  });
}

actsum_status actsum_model_decode_split(const actsum_model* model, const actsum_corpus* corpus, const char* split,
                                        int beam, int max_len, const char* out_tsv, char** scores_json) {
  return guarded([&] {
    require(model && corpus, "model and corpus must be non-null");
    if (beam < 1) throw DomainError("beam must be >= 1");
    const auto items = decode_episodes(model->ckpt, corpus->splits.get(split_arg(split)), beam, max_len_arg(max_len));
    if (out_tsv) write_items(out_tsv, items);
    if (scores_json) *scores_json = dup(score_json(score_items(items)).dump(2));
  });
}

actsum_status actsum_pipeline_run(const actsum_model* vision, const actsum_model* text, const actsum_corpus* corpus,
                                  const char* split, const char* out_dir, char** scores_json) {
  return guarded([&] {
    require(text && corpus, "text model and corpus must be non-null");
    const auto& eps = corpus->splits.get(split_arg(split));
    const auto target = parse_task_name(text->ckpt.task).target;
    fs::path dir;
    if (out_dir) {
      dir = out_dir;
      fs::create_directories(dir);
    }
    const auto items = run_pipeline(vision ? &vision->ckpt : nullptr, text->ckpt, eps, target,
                                    dir.empty() ? fs::path() : dir / "plans.tsv");
    if (!dir.empty()) write_items(dir / "outputs.tsv", items);
    if (scores_json) *scores_json = dup(score_json(score_items(items)).dump(2));
  });
}

actsum_status actsum_matrix_run(const actsum_corpus* corpus, const char* config_json, const char* out_dir,
                                actsum_log_fn log, void* user, char** table_text) {
  return guarded([&] {
    require(corpus && out_dir, "corpus and out_dir must be non-null");
    const auto cfg = config_from(config_json);
    fs::create_directories(out_dir);
    LogFn fn;
    if (log) fn = [log, user](const std::string& line) { log(line.c_str(), user); };
    const auto table = run_matrix(matrix_config(cfg, out_dir), corpus->splits, cfg.corpus.lexicon, fn);
    const auto write = [&](const char* name, const std::string& text) {
      std::ofstream out(fs::path(out_dir) / name, std::ios::trunc);
      if (!out) throw IoError(std::string("cannot write ") + name);
      out << text;
    };
    write("scores.tsv", table.tsv());
    write("scores.txt", table.format());
    write("errors.tsv", table.error_tsv());
    if (table_text) *table_text = dup(table.format());
  });
}

actsum_status actsum_score_dump(const char* dump_tsv, char** scores_json) {
  return guarded([&] {
    require(dump_tsv && scores_json, "dump_tsv and scores_json must be non-null");
    const auto rows = read_dump(dump_tsv);
    std::vector<Tokens> c, r;
    for (const auto& row : rows) {
      c.push_back(row.generated);
      r.push_back(row.reference);
    }
    *scores_json = dup(score_json(score_corpus(c, r)).dump(2));
  });
}

actsum_status actsum_error_report(const actsum_corpus* corpus, const char* dump_tsv, const char* label,
                                  char** report_text) {
  return guarded([&] {
    require(corpus && dump_tsv && report_text, "corpus, dump_tsv and report_text must be non-null");
    std::map<std::string, const Episode*> by_id;
    for (auto s : {Split::Train, Split::ValidSeen, Split::ValidUnseen})
      for (const auto& e : corpus->splits.get(s)) by_id[e->episode_id] = e.get();
    const auto lexicon = synth::Lexicon::standard();
    ErrorInput in{label ? label : "summaries", {}};
    for (const auto& row : read_dump(dump_tsv)) {
      const auto it = by_id.find(row.episode_id);
      if (it == by_id.end()) throw DomainError("dump names unknown episode '" + row.episode_id + "'");
      in.labels.push_back(classify_errors(row.generated, it->second->gold_slots, lexicon));
    }
    *report_text = dup(format_error_report(error_table(std::span<const ErrorInput>(&in, 1))));
  });
}

actsum_status actsum_rouge_n(const char* candidate, const char* reference, int n, double out[3]) {
  return guarded([&] {
    require(candidate && reference && out, "arguments must be non-null");
    const Tokens ref = tokenize(reference);
    const auto s = rouge_n(tokenize(candidate), std::span<const Tokens>(&ref, 1), n);
    out[0] = s.recall;
    out[1] = s.precision;
    out[2] = s.f1;
  });
}

actsum_status actsum_rouge_l(const char* candidate, const char* reference, double* f1) {
  return guarded([&] {
    require(candidate && reference && f1, "arguments must be non-null");
    const Tokens ref = tokenize(reference);
    *f1 = rouge_l(tokenize(candidate), std::span<const Tokens>(&ref, 1));
  });
}

actsum_status actsum_bleu(const char* const* candidates, const char* const* references, size_t count, int max_n,
                          double* score) {
  return guarded([&] {
    require(candidates && references && score, "arguments must be non-null");
    std::vector<Tokens> c, r;
    for (size_t i = 0; i < count; ++i) {
      require(candidates[i] && references[i], "null string in corpus");
      c.push_back(tokenize(candidates[i]));
      r.push_back(tokenize(references[i]));
    }
    *score = bleu(c, r, max_n);
  });
}

actsum_status actsum_grad_check(const char* model_json, uint64_t seed, double* max_relative_error) {
  return guarded([&] {
    require(model_json && max_relative_error, "arguments must be non-null");
    ModelConfig mc;
    merge_json(json::parse(model_json), mc);
    const auto r = grad_check(mc, seed);
    if (!r.finite) throw NumericError("non-finite gradient in grad check");
    *max_relative_error = r.max_relative_error;
  });
}

actsum_status actsum_count_parameters(const char* model_json, uint64_t* count) {
  return guarded([&] {
    require(model_json && count, "arguments must be non-null");
    ModelConfig mc;
    merge_json(json::parse(model_json), mc);
    *count = count_parameters(mc);
  });
}

}  // extern "C"
