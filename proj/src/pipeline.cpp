#include "pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "error.hpp"

namespace actsum {

namespace fs = std::filesystem;

ModelKind model_kind_for(const TaskSpec& spec) {
  switch (spec.input) {
    case InputRepr::Images: return ModelKind::Vision;
    case InputRepr::ImagesPddl:
    case InputRepr::ImagesActions: return ModelKind::Multimodal;
    default: return ModelKind::Text;
  }
}

namespace {

using DecodeCache = std::map<std::pair<Tokens, const Episode*>, Tokens>;

std::vector<Tokens> decode_pairs(const Checkpoint& ckpt, const PairDataset& pairs, int beam, int max_len,
                                 DecodeCache* cache) {
  DecodeCache local;
  if (!cache) cache = &local;
  auto opts = default_decode_options(ckpt);
  opts.beam = beam;
  if (max_len != 0) opts.max_len = max_len;
  const bool frames = ckpt.config().kind != ModelKind::Text;
  std::vector<Tokens> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto key = std::make_pair(p.input, frames ? p.episode.get() : nullptr);
    auto it = cache->find(key);
    if (it == cache->end()) it = cache->emplace(std::move(key), decode(ckpt, p, opts)).first;
    out.push_back(it->second);
  }
  return out;
}

std::vector<PipelineItem> to_items(const PairDataset& pairs, std::vector<Tokens> outputs) {
  std::vector<PipelineItem> items;
  items.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    items.push_back({pairs[i].episode_id, pairs[i].annotator_id, pairs[i].input, std::move(outputs[i]), pairs[i].target});
  return items;
}

bool is_text_target(TargetKind t) { return t == TargetKind::Summary || t == TargetKind::Instructions; }

}  // namespace

GenerationSource generate_plans(const Checkpoint& vision, const std::vector<EpisodePtr>& episodes) {
  const auto spec = parse_task_name(vision.task);
  if (spec.input != InputRepr::Images || is_text_target(spec.target))
    throw DomainError("stage-1 checkpoint must map images to plan text, got " + vision.task);
  GenerationSource gen;
  auto opts = default_decode_options(vision);
  for (const auto& e : episodes) {
    Pair p{{}, e, {}, e->episode_id, ""};
    gen.plans[e->episode_id] = decode(vision, p, opts);
  }
  return gen;
}

std::vector<PipelineItem> run_pipeline(const Checkpoint* vision, const Checkpoint& text,
                                       const std::vector<EpisodePtr>& episodes, TargetKind target,
                                       const fs::path& plan_dump) {
  if (!is_text_target(target)) throw DomainError("pipeline target must be summary or instructions");
  const auto text_spec = parse_task_name(text.task);
  if ((text_spec.input != InputRepr::Pddl && text_spec.input != InputRepr::Actions) || text_spec.target != target)
    throw DomainError("stage-2 checkpoint " + text.task + " does not map plan text to " +
                      std::string(to_string(target)));
  const TargetKind plan_kind = text_spec.input == InputRepr::Pddl ? TargetKind::Pddl : TargetKind::Actions;
  if (vision) {
    const auto vspec = parse_task_name(vision->task);
    if (vspec.input != InputRepr::Images || vspec.target != plan_kind)
      throw DomainError("stage-1 checkpoint " + vision->task + " does not produce the plan text " + text.task +
                        " reads");
  }
  if (episodes.empty()) return {};

  GenerationSource plans;
  if (vision) {
    plans = generate_plans(*vision, episodes);
  } else {
    for (const auto& e : episodes) plans.plans[e->episode_id] = render_input_text(*e, text_spec.input, text.render);
  }
  if (!plan_dump.empty()) {
    plans.save(plan_dump);
    plans = GenerationSource::load(plan_dump);
  }
  const TaskSpec gen_spec{text_spec.input == InputRepr::Pddl ? InputRepr::GenPddl : InputRepr::GenActions, target};
  const auto pairs = extract_pairs(episodes, gen_spec, text.render, &plans);
  return to_items(pairs, decode_pairs(text, pairs, 1, 0, nullptr));
}

std::vector<PipelineItem> run_direct(const Checkpoint& text, const std::vector<EpisodePtr>& episodes,
                                     TargetKind target) {
  const auto spec = parse_task_name(text.task);
  if (spec.target != target) throw DomainError("checkpoint " + text.task + " has a different target");
  return decode_episodes(text, episodes, 1);
}

std::vector<PipelineItem> decode_episodes(const Checkpoint& ckpt, const std::vector<EpisodePtr>& episodes, int beam,
                                          int max_len) {
  const auto spec = parse_task_name(ckpt.task);
  if (spec.is_generated()) throw DomainError(ckpt.task + " reads generated plans; run it through the pipeline");
  const auto pairs = extract_pairs(episodes, spec, ckpt.render);
  return to_items(pairs, decode_pairs(ckpt, pairs, beam, max_len, nullptr));
}

// ---- reference values ----

const std::vector<std::string>& matrix_task_names() {
  static const std::vector<std::string> names{
      "pddl2sum",    "act2sum",     "genpddl2sum",  "genact2sum",   "pddl2inst",    "act2inst",
      "genpddl2inst", "genact2inst", "img2sum",      "img2inst",     "img2pddl",     "img2act",
      "imgpddl2sum", "imgact2sum",  "imgpddl2inst", "imgact2inst"};
  return names;
}

std::optional<ReferenceScores> reference_scores(const std::string& task) {
  static const std::map<std::string, ReferenceScores> table{
      {"pddl2sum", {{.628, .372, .590, .624, .902}, {.610, .358, .587, .607, .890}}},
      {"act2sum", {{.610, .358, .589, .604, .881}, {.630, .377, .599, .647, .900}}},
      {"genpddl2sum", {{.596, .344, .565, .580, .877}, {.518, .271, .505, .472, .810}}},
      {"genact2sum", {{.555, .301, .537, .485, .826}, {.514, .269, .491, .425, .760}}},
      {"pddl2inst", {{.557, .325, .529, .529, .866}, {.545, .310, .519, .527, .869}}},
      {"act2inst", {{.566, .329, .528, .539, .854}, {.570, .338, .527, .551, .867}}},
      {"genpddl2inst", {{.542, .312, .514, .497, .864}, {.490, .260, .457, .427, .827}}},
      {"genact2inst", {{.508, .279, .488, .462, .844}, {.493, .270, .457, .433, .826}}},
      {"img2sum", {{.582, .321, .556, .550, .862}, {.519, .265, .496, .438, .779}}},
      {"img2inst", {{.540, .314, .496, .501, .805}, {.536, .292, .460, .438, .769}}},
      {"img2pddl", {{.923, .881, .923, .854, .942}, {.761, .597, .763, .594, .824}}},
      {"img2act", {{.858, .713, .821, .652, .856}, {.822, .654, .769, .590, .812}}},
      {"imgpddl2sum", {{.606, .355, .575, .587, .883}, {.571, .325, .543, .527, .840}}},
      {"imgact2sum", {{.572, .321, .549, .524, .843}, {.519, .269, .498, .417, .785}}},
      {"imgpddl2inst", {{.563, .329, .498, .514, .830}, {.542, .286, .451, .437, .792}}},
      {"imgact2inst", {{.554, .322, .491, .501, .815}, {.539, .289, .461, .434, .767}}},
  };
  const auto it = table.find(task);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::optional<double> reference_no_errors(const std::string& task) {
  static const std::map<std::string, double> table{
      {"pddl2sum", 98}, {"act2sum", 96},     {"genpddl2sum", 54}, {"genact2sum", 46},
      {"img2sum", 38},  {"imgpddl2sum", 56}, {"imgact2sum", 52}};
  const auto it = table.find(task);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

// ---- matrix ----

std::uint64_t corpus_fingerprint(const SplitSet& splits) {
  std::uint64_t h = 0x5157;
  for (auto s : {Split::Train, Split::ValidSeen, Split::ValidUnseen}) {
    h = mix_seed(h, hash_string(to_string(s)));
    for (const auto& e : splits.get(s)) {
      h = mix_seed(h, hash_string(e->episode_id));
      h = mix_seed(h, hash_string(canonical_high_pddl_text(e->high_pddl)));
      h = mix_seed(h, e->low_actions.size());
      h = mix_seed(h, e->frames->count());
      for (const auto& a : e->annotations) {
        h = mix_seed(h, hash_string(a.summary));
        for (const auto& i : a.instructions) h = mix_seed(h, hash_string(i));
      }
    }
  }
  return h;
}

ModelConfig row_model_config(const std::string& task, const MatrixConfig& config) {
  ModelConfig mc = config.model;
  if (auto it = config.overrides.find(task); it != config.overrides.end() && it->second.contains("model"))
    merge_json(it->second.at("model"), mc);
  mc.kind = model_kind_for(parse_task_name(task));
  return mc;
}

TrainConfig row_train_config(const std::string& task, const MatrixConfig& config) {
  TrainConfig tc = config.train;
  if (auto it = config.overrides.find(task); it != config.overrides.end() && it->second.contains("train"))
    merge_json(it->second.at("train"), tc);
  return tc;
}

Checkpoint obtain_checkpoint(const std::string& task, const MatrixConfig& config, const SplitSet& splits,
                             const LogFn& log) {
  const auto spec = parse_task_name(task);
  if (spec.is_generated()) throw DomainError("generated-plan rows reuse other checkpoints; nothing to train for " + task);
  const auto mc = row_model_config(task, config);
  const auto tc = row_train_config(task, config);
  nlohmann::json key{{"task", task},
                     {"model", to_json(mc)},
                     {"train", to_json(tc)},
                     {"collapse_runs", config.render.collapse_runs},
                     {"corpus", std::to_string(corpus_fingerprint(splits))}};
  key["model"].erase("vocab_size");
  const std::string key_text = key.dump();
  fs::path ckpt_path, key_path;
  if (!config.output_dir.empty()) {
    const auto dir = config.output_dir / "checkpoints";
    fs::create_directories(dir);
    ckpt_path = dir / (task + ".ckpt");
    key_path = dir / (task + ".key.json");
    if (config.reuse_checkpoints && fs::exists(ckpt_path) && fs::exists(key_path)) {
      std::ifstream in(key_path);
      std::stringstream ss;
      ss << in.rdbuf();
      if (ss.str() == key_text + "\n") {
        if (log) log(task + ": reusing cached checkpoint " + ckpt_path.string());
        return load_checkpoint(ckpt_path);
      }
      if (log) log(task + ": cached checkpoint is stale, retraining");
    }
  }
  const auto pairs = extract_pairs(splits, spec, config.render);
  if (log)
    log(task + ": training on " + std::to_string(pairs.train.size()) + " pairs (" +
        std::to_string(count_parameters([&] {
          auto m = mc;
          m.vocab_size = build_task_vocab(pairs.train, tc.min_freq).size();
          return m;
        }())) +
        " parameters)");
  const auto started = std::chrono::steady_clock::now();
  auto ckpt = train_model(task, mc, tc, pairs.train, pairs.valid_seen, [&](const EpochRecord& r) {
    if (!log) return;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s: epoch %d loss %.4f token_acc %.4f valid_rougeL %.4f", task.c_str(), r.epoch,
                  r.train_loss, r.train_token_accuracy, r.valid_rouge_l);
    log(buf);
  });
  ckpt.render = config.render;
  if (!ckpt_path.empty()) {
    save_checkpoint(ckpt, ckpt_path);
    std::ofstream out(key_path, std::ios::trunc);
    out << key_text << "\n";
    // kept apart from the key and the checkpoint, which must stay reproducible
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ofstream timing(config.output_dir / "checkpoints" / (task + ".timing.json"), std::ios::trunc);
    timing << nlohmann::json{{"train_seconds", secs}, {"epochs", ckpt.history.size()}}.dump() << "\n";
  }
  return ckpt;
}

namespace {

std::string join_tokens(const Tokens& t) { return join(t, " "); }

void dump_items(const fs::path& path, const std::vector<PipelineItem>& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "episode_id\tannotator_id\tinput\tgenerated\treference\n";
  for (const auto& it : items)
    out << it.episode_id << '\t' << it.annotator_id << '\t' << join_tokens(it.plan) << '\t' << join_tokens(it.output)
        << '\t' << join_tokens(it.reference) << '\n';
}

}  // namespace

ScoreTable run_matrix(const MatrixConfig& config, const SplitSet& splits, const synth::Lexicon& lexicon,
                      const LogFn& log) {
  ScoreTable table;
  std::map<std::string, Checkpoint> cache;
  const auto get = [&](const std::string& task) -> const Checkpoint& {
    auto it = cache.find(task);
    if (it == cache.end()) it = cache.emplace(task, obtain_checkpoint(task, config, splits, log)).first;
    return it->second;
  };

  for (const auto& task : config.rows) {
    MatrixRowResult row;
    row.task = task;
    try {
      const auto spec = parse_task_name(task);
      fs::path row_dir;
      if (!config.output_dir.empty()) {
        row_dir = config.output_dir / task;
        fs::create_directories(row_dir);
      }
      for (auto split : {Split::ValidSeen, Split::ValidUnseen}) {
        const auto& episodes = splits.get(split);
        std::vector<PipelineItem> items;
        if (spec.is_generated()) {
          const bool pddl = spec.input == InputRepr::GenPddl;
          const auto& vision = get(pddl ? "img2pddl" : "img2act");
          const auto& text = get(std::string(pddl ? "pddl" : "act") + "2" +
                                 (spec.target == TargetKind::Summary ? "sum" : "inst"));
          const auto dump = row_dir.empty() ? fs::path() : row_dir / ("plans_" + std::string(to_string(split)) + ".tsv");
          items = run_pipeline(&vision, text, episodes, spec.target, dump);
        } else {
          items = decode_episodes(get(task), episodes, config.beam);
        }
        if (log) log(task + ": decoded " + std::to_string(items.size()) + " " + std::string(to_string(split)) + " pairs");
        std::vector<Tokens> cands, refs;
        for (const auto& it : items) {
          cands.push_back(it.output);
          refs.push_back(it.reference);
        }
        ScoreRow score = score_corpus(cands, refs);
        score.task = task;
        score.split = std::string(to_string(split));
        (split == Split::ValidSeen ? row.seen : row.unseen) = score;
        if (spec.target == TargetKind::Summary && !items.empty()) {
          std::map<std::string, const Episode*> by_id;
          for (const auto& e : episodes) by_id[e->episode_id] = e.get();
          ErrorInput in{task, {}};
          for (const auto& it : items) in.labels.push_back(classify_errors(it.output, by_id.at(it.episode_id)->gold_slots, lexicon));
          const auto report = error_table(std::span<const ErrorInput>(&in, 1));
          (split == Split::ValidSeen ? row.seen_errors : row.unseen_errors) = report.rows.front();
        }
        if (!row_dir.empty()) dump_items(row_dir / (std::string(to_string(split)) + ".tsv"), items);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      if (log) log(task + ": row failed: " + row.error);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

const MatrixRowResult* ScoreTable::find(const std::string& task) const {
  for (const auto& r : rows)
    if (r.task == task) return &r;
  return nullptr;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string ScoreTable::tsv() const {
  std::ostringstream out;
  out << "task";
  for (const char* side : {"seen", "unseen"})
    for (const char* m : {"r1", "r2", "rl", "bleu", "bleu1", "n"}) out << '\t' << side << '_' << m;
  out << "\tstatus\n";
  for (const auto& r : rows) {
    out << r.task;
    for (const auto* s : {&r.seen, &r.unseen}) {
      if (*s) {
        out << '\t' << fmt((*s)->rouge1_recall) << '\t' << fmt((*s)->rouge2_recall) << '\t' << fmt((*s)->rougeL_f1)
            << '\t' << fmt((*s)->bleu) << '\t' << fmt((*s)->bleu1) << '\t' << (*s)->count;
      } else {
        out << "\t\t\t\t\t\t";
      }
    }
    out << '\t' << (r.error.empty() ? "ok" : "failed: " + r.error) << '\n';
  }
  return out.str();
}

std::string ScoreTable::format(bool with_reference) const {
  std::ostringstream out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-14s | %6s %6s %6s %6s %6s | %6s %6s %6s %6s %6s\n", "task", "R-1", "R-2", "R-L",
                "Bleu", "Bleu-1", "R-1", "R-2", "R-L", "Bleu", "Bleu-1");
  out << std::string(14, ' ') << " | " << "seen" << std::string(32, ' ') << " | unseen\n" << buf;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      out << r.task << std::string(r.task.size() < 14 ? 14 - r.task.size() : 0, ' ') << " | failed: " << r.error << '\n';
      continue;
    }
    const auto cell = [](const std::optional<ScoreRow>& s) {
      char b[128];
      if (!s) return std::string(34, ' ');
      std::snprintf(b, sizeof b, "%6s %6s %6s %6s %6s", fmt3(s->rouge1_recall).c_str(), fmt3(s->rouge2_recall).c_str(),
                    fmt3(s->rougeL_f1).c_str(), fmt3(s->bleu).c_str(), fmt3(s->bleu1).c_str());
      return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "%-14s | %s | %s\n", r.task.c_str(), cell(r.seen).c_str(), cell(r.unseen).c_str());
    out << buf;
    if (with_reference) {
      if (const auto ref = reference_scores(r.task)) {
        const auto side = [](const std::array<double, 5>& a) {
          char b[128];
          std::snprintf(b, sizeof b, "%6s %6s %6s %6s %6s", fmt3(a[0]).c_str(), fmt3(a[1]).c_str(), fmt3(a[2]).c_str(),
                        fmt3(a[3]).c_str(), fmt3(a[4]).c_str());
          return std::string(b);
        };
        std::snprintf(buf, sizeof buf, "%-14s | %s | %s\n", "  (paper)", side(ref->seen).c_str(),
                      side(ref->unseen).c_str());
        out << buf;
      }
    }
  }
  out << "metrics: " << kMetricSettings << '\n';
  return out.str();
}

std::string ScoreTable::error_tsv() const {
  std::ostringstream out;
  out << "task\tsplit\tno_errors\taction\tobject\tplace\textra\tclassified\tpaper_no_errors\n";
  for (const auto& r : rows) {
    for (const auto& [split, e] : {std::pair{"valid_seen", &r.seen_errors}, std::pair{"valid_unseen", &r.unseen_errors}}) {
      if (!*e) continue;
      const auto& x = **e;
      out << r.task << '\t' << split << '\t' << fmt(x.no_errors) << '\t' << fmt(x.action) << '\t' << fmt(x.object)
          << '\t' << fmt(x.place) << '\t' << fmt(x.extra) << '\t' << (x.examples - x.unavailable) << '\t';
      if (const auto p = reference_no_errors(r.task)) out << fmt(*p);
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace actsum
