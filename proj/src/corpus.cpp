#include "corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"
#include "features.hpp"

namespace actsum {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::array<Split, 3> kSplits = {Split::Train, Split::ValidSeen, Split::ValidUnseen};

const json& require(const json& obj, const char* field, const fs::path& path) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw LoadError(path.string() + ": missing field '" + field + "'");
  return *it;
}

std::string require_string(const json& obj, const char* field, const fs::path& path) {
  const auto& v = require(obj, field, path);
  if (!v.is_string()) throw LoadError(path.string() + ": field '" + field + "' must be a string");
  return v.get<std::string>();
}

const json& require_array(const json& obj, const char* field, const fs::path& path) {
  const auto& v = require(obj, field, path);
  if (!v.is_array()) throw LoadError(path.string() + ": field '" + field + "' must be an array");
  return v;
}

std::vector<std::string> string_list(const json& arr, const std::string& field,
                                     const fs::path& path) {
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw LoadError(path.string() + ": '" + field + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::ValidSeen: return "valid_seen";
    case Split::ValidUnseen: return "valid_unseen";
  }
  return "unknown";
}

std::optional<Split> parse_split(std::string_view name) {
  for (auto s : kSplits)
    if (to_string(s) == name) return s;
  return std::nullopt;
}

const std::vector<EpisodePtr>& SplitSet::get(Split s) const {
  switch (s) {
    case Split::Train: return train;
    case Split::ValidSeen: return valid_seen;
    case Split::ValidUnseen: return valid_unseen;
  }
  throw DomainError("unknown split");
}

std::vector<EpisodePtr>& SplitSet::get(Split s) {
  return const_cast<std::vector<EpisodePtr>&>(std::as_const(*this).get(s));
}

std::size_t annotation_count(const std::vector<EpisodePtr>& episodes) {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e->annotations.size();
  return n;
}

void check_split_invariants(const SplitSet& splits) {
  std::unordered_set<std::string> ids;
  for (auto s : kSplits)
    for (const auto& e : splits.get(s))
      if (!ids.insert(e->episode_id).second)
        throw LoadError("episode_id '" + e->episode_id + "' occurs more than once across splits");
  std::set<std::string> train_envs;
  for (const auto& e : splits.train) train_envs.insert(e->environment_id);
  for (const auto& e : splits.valid_seen)
    if (!train_envs.count(e->environment_id))
      throw LoadError("valid_seen episode '" + e->episode_id + "' uses environment '" +
                      e->environment_id + "' absent from train");
  for (const auto& e : splits.valid_unseen)
    if (train_envs.count(e->environment_id))
      throw LoadError("valid_unseen episode '" + e->episode_id + "' uses training environment '" +
                      e->environment_id + "'");
}

EpisodePtr load_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open trajectory " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object()) throw LoadError(path.string() + ": top level must be an object");

  Episode e;
  e.episode_id = require_string(doc, "episode_id", path);
  e.environment_id = require_string(doc, "environment_id", path);
  const auto task = require_string(doc, "task_type", path);
  const auto type = parse_task_type(task);
  if (!type) throw LoadError(path.string() + ": field 'task_type' has unknown value '" + task + "'");
  e.task_type = *type;

  for (const auto& step : require_array(doc, "high_pddl", path)) {
    HighPddlStep s;
    s.action_name = require_string(step, "action", path);
    s.arguments = string_list(require_array(step, "args", path), "high_pddl.args", path);
    e.high_pddl.push_back(std::move(s));
  }
  for (const auto& act : require_array(doc, "low_actions", path)) {
    LowAction a;
    a.action_name = require_string(act, "action", path);
    if (auto it = act.find("target"); it != act.end() && !it->is_null()) {
      if (!it->is_string()) throw LoadError(path.string() + ": low_actions.target must be a string");
      a.target = it->get<std::string>();
    }
    e.low_actions.push_back(std::move(a));
  }
  for (const auto& ann : require_array(doc, "annotations", path)) {
    Annotation a;
    a.summary = require_string(ann, "summary", path);
    a.instructions = string_list(require_array(ann, "instructions", path), "instructions", path);
    a.annotator_id = require_string(ann, "annotator_id", path);
    e.annotations.push_back(std::move(a));
  }
  const auto features = require_string(doc, "features_path", path);
  e.frames = FrameSource::from_file(path.parent_path() / features);

  if (auto it = doc.find("gold_slots"); it != doc.end() && !it->is_null()) {
    GoldSlots g;
    g.main_action = require_string(*it, "main_action", path);
    g.main_object = require_string(*it, "main_object", path);
    const auto& count = require(*it, "object_count", path);
    if (!count.is_number_integer()) throw LoadError(path.string() + ": gold_slots.object_count must be an integer");
    g.object_count = count.get<int>();
    g.places = string_list(require_array(*it, "places", path), "gold_slots.places", path);
    if (auto o = it->find("objects"); o != it->end())
      g.objects = string_list(*o, "gold_slots.objects", path);
    e.gold_slots = std::move(g);
  }
  return Episode::create(std::move(e));
}

void write_trajectory(const Episode& e, const fs::path& json_path, const std::string& features_path) {
  json doc;
  doc["episode_id"] = e.episode_id;
  doc["environment_id"] = e.environment_id;
  doc["task_type"] = std::string(to_string(e.task_type));
  doc["high_pddl"] = json::array();
  for (const auto& s : e.high_pddl)
    doc["high_pddl"].push_back({{"action", s.action_name}, {"args", s.arguments}});
  doc["low_actions"] = json::array();
  for (const auto& a : e.low_actions) {
    json act = {{"action", a.action_name}};
    if (a.target) act["target"] = *a.target;
    doc["low_actions"].push_back(std::move(act));
  }
  doc["annotations"] = json::array();
  for (const auto& a : e.annotations)
    doc["annotations"].push_back(
        {{"summary", a.summary}, {"instructions", a.instructions}, {"annotator_id", a.annotator_id}});
  doc["features_path"] = features_path;
  if (e.gold_slots) {
    const auto& g = *e.gold_slots;
    doc["gold_slots"] = {{"main_action", g.main_action},
                         {"main_object", g.main_object},
                         {"object_count", g.object_count},
                         {"places", g.places},
                         {"objects", g.objects}};
  }
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw IoError("cannot write trajectory " + json_path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + json_path.string());
}

SplitSet load_splits(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw LoadError("split manifest " + dir.string() + " is not a directory");
  SplitSet splits;
  for (auto s : kSplits) {
    const auto sub = dir / std::string(to_string(s));
    if (!fs::is_directory(sub))
      throw LoadError("split manifest " + dir.string() + ": missing " + std::string(to_string(s)) + "/");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(sub))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    auto& out = splits.get(s);
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(load_trajectory(f));
  }
  check_split_invariants(splits);
  return splits;
}

void write_splits(const SplitSet& splits, const fs::path& dir) {
  for (auto s : kSplits) {
    const auto sub = dir / std::string(to_string(s));
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
    for (const auto& e : splits.get(s)) {
      const auto features = e->episode_id + ".feat";
      write_feature_file(sub / features, e->frames->frames());
      write_trajectory(*e, sub / (e->episode_id + ".json"), features);
    }
  }
}

DedupResult dedup_validation(const SplitSet& splits) {
  std::unordered_set<std::string> train_keys;
  for (const auto& e : splits.train) train_keys.insert(canonical_high_pddl_text(e->high_pddl));

  DedupResult result;
  result.splits.train = splits.train;
  const auto filter = [&](const std::vector<EpisodePtr>& in, std::vector<EpisodePtr>& out,
                          DedupSplitReport& rep) {
    rep.episodes_before = in.size();
    rep.annotations_before = annotation_count(in);
    for (const auto& e : in) {
      // The key is per episode, so an overlapping episode loses every
      // annotation and is dropped with them.
      if (train_keys.count(canonical_high_pddl_text(e->high_pddl))) continue;
      out.push_back(e);
    }
    rep.episodes_after = out.size();
    rep.annotations_after = annotation_count(out);
  };
  filter(splits.valid_seen, result.splits.valid_seen, result.report.valid_seen);
  filter(splits.valid_unseen, result.splits.valid_unseen, result.report.valid_unseen);
  return result;
}

std::string_view to_string(InputRepr r) {
  switch (r) {
    case InputRepr::Pddl: return "pddl";
    case InputRepr::Actions: return "actions";
    case InputRepr::Images: return "images";
    case InputRepr::ImagesPddl: return "images+pddl";
    case InputRepr::ImagesActions: return "images+actions";
    case InputRepr::GenPddl: return "gen_pddl";
    case InputRepr::GenActions: return "gen_actions";
  }
  return "unknown";
}

std::string_view to_string(TargetKind t) {
  switch (t) {
    case TargetKind::Summary: return "summary";
    case TargetKind::Instructions: return "instructions";
    case TargetKind::Pddl: return "pddl";
    case TargetKind::Actions: return "actions";
  }
  return "unknown";
}

std::optional<InputRepr> parse_input_repr(std::string_view s) {
  for (auto r : {InputRepr::Pddl, InputRepr::Actions, InputRepr::Images, InputRepr::ImagesPddl,
                 InputRepr::ImagesActions, InputRepr::GenPddl, InputRepr::GenActions})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::optional<TargetKind> parse_target_kind(std::string_view s) {
  for (auto t : {TargetKind::Summary, TargetKind::Instructions, TargetKind::Pddl, TargetKind::Actions})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

bool TaskSpec::uses_frames() const {
  return input == InputRepr::Images || input == InputRepr::ImagesPddl ||
         input == InputRepr::ImagesActions;
}

std::optional<InputRepr> TaskSpec::text_input() const {
  switch (input) {
    case InputRepr::Pddl:
    case InputRepr::ImagesPddl:
    case InputRepr::GenPddl: return InputRepr::Pddl;
    case InputRepr::Actions:
    case InputRepr::ImagesActions:
    case InputRepr::GenActions: return InputRepr::Actions;
    case InputRepr::Images: return std::nullopt;
  }
  return std::nullopt;
}

void validate(const TaskSpec& spec) {
  const bool plan_target = spec.target == TargetKind::Pddl || spec.target == TargetKind::Actions;
  if (plan_target && spec.input != InputRepr::Images)
    throw DomainError("task " + std::string(to_string(spec.input)) + "->" +
                      std::string(to_string(spec.target)) +
                      ": plan-valued targets are only produced from images");
}

namespace {

constexpr std::array<std::pair<InputRepr, std::string_view>, 7> kInputShort = {{
    {InputRepr::Pddl, "pddl"},
    {InputRepr::Actions, "act"},
    {InputRepr::Images, "img"},
    {InputRepr::ImagesPddl, "imgpddl"},
    {InputRepr::ImagesActions, "imgact"},
    {InputRepr::GenPddl, "genpddl"},
    {InputRepr::GenActions, "genact"},
}};

constexpr std::array<std::pair<TargetKind, std::string_view>, 4> kTargetShort = {{
    {TargetKind::Summary, "sum"},
    {TargetKind::Instructions, "inst"},
    {TargetKind::Pddl, "pddl"},
    {TargetKind::Actions, "act"},
}};

}  // namespace

std::string task_name(const TaskSpec& spec) {
  std::string out;
  for (const auto& [r, n] : kInputShort)
    if (r == spec.input) out = n;
  out += "2";
  for (const auto& [t, n] : kTargetShort)
    if (t == spec.target) out += n;
  return out;
}

TaskSpec parse_task_name(std::string_view name) {
  const auto pos = name.find('2');
  if (pos == std::string_view::npos) throw DomainError("unknown task '" + std::string(name) + "'");
  const auto in = name.substr(0, pos);
  const auto out = name.substr(pos + 1);
  TaskSpec spec;
  bool found_in = false, found_out = false;
  for (const auto& [r, n] : kInputShort)
    if (n == in) spec.input = r, found_in = true;
  for (const auto& [t, n] : kTargetShort)
    if (n == out) spec.target = t, found_out = true;
  if (!found_in || !found_out) throw DomainError("unknown task '" + std::string(name) + "'");
  validate(spec);
  return spec;
}

GenerationSource GenerationSource::load(const fs::path& tsv) {
  std::ifstream in(tsv);
  if (!in) throw LoadError("cannot open generation file " + tsv.string());
  GenerationSource src;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw LoadError(tsv.string() + ":" + std::to_string(lineno) + ": expected episode_id<TAB>text");
    src.plans[line.substr(0, tab)] = tokenize(line.substr(tab + 1));
  }
  return src;
}

void GenerationSource::save(const fs::path& tsv) const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : plans) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  std::ofstream out(tsv, std::ios::trunc);
  if (!out) throw IoError("cannot write " + tsv.string());
  for (const auto& id : ids) out << id << '\t' << join(plans.at(id)) << '\n';
  if (!out) throw IoError("write failed for " + tsv.string());
}

Tokens join_instructions(const std::vector<std::string>& instructions) {
  Tokens out;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    if (i) out.emplace_back(kSentenceSeparator);
    auto t = tokenize(instructions[i]);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

Tokens render_input_text(const Episode& e, InputRepr repr, const RenderOptions& opts) {
  switch (repr) {
    case InputRepr::Pddl:
    case InputRepr::ImagesPddl:
    case InputRepr::GenPddl: return canonicalize_high_pddl(e.high_pddl);
    case InputRepr::Actions:
    case InputRepr::ImagesActions:
    case InputRepr::GenActions: return simplify_low_actions(e.low_actions, opts.collapse_runs);
    case InputRepr::Images: return {};
  }
  return {};
}

Tokens render_target(const Episode& e, const Annotation* annotation, TargetKind target,
                     const RenderOptions& opts) {
  switch (target) {
    case TargetKind::Summary:
      if (!annotation) throw DomainError("summary target needs an annotation");
      return tokenize(annotation->summary);
    case TargetKind::Instructions:
      if (!annotation) throw DomainError("instruction target needs an annotation");
      return join_instructions(annotation->instructions);
    case TargetKind::Pddl: return canonicalize_high_pddl(e.high_pddl);
    case TargetKind::Actions: return simplify_low_actions(e.low_actions, opts.collapse_runs);
  }
  return {};
}

PairDataset extract_pairs(const std::vector<EpisodePtr>& episodes, const TaskSpec& spec,
                          const RenderOptions& opts, const GenerationSource* generated) {
  validate(spec);
  if (spec.is_generated() && !generated)
    throw DomainError("task " + task_name(spec) + " needs a generation source");
  PairDataset pairs;
  const bool plan_target = spec.target == TargetKind::Pddl || spec.target == TargetKind::Actions;
  for (const auto& e : episodes) {
    Tokens input;
    if (spec.is_generated()) {
      const auto it = generated->plans.find(e->episode_id);
      if (it == generated->plans.end())
        throw DomainError("no generated plan for episode '" + e->episode_id + "'");
      input = it->second;
    } else {
      input = render_input_text(*e, spec.input, opts);
    }
    if (plan_target) {
      pairs.push_back({input, e, render_target(*e, nullptr, spec.target, opts), e->episode_id, ""});
      continue;
    }
    for (const auto& a : e->annotations)
      pairs.push_back({input, e, render_target(*e, &a, spec.target, opts), e->episode_id,
                       a.annotator_id});
  }
  return pairs;
}

SplitPairs extract_pairs(const SplitSet& splits, const TaskSpec& spec, const RenderOptions& opts,
                         const GenerationSource* generated) {
  SplitPairs out;
  if (spec.is_generated()) {
    // Stage-2 models are trained on gold plan text.
    TaskSpec gold = spec;
    gold.input = spec.input == InputRepr::GenPddl ? InputRepr::Pddl : InputRepr::Actions;
    out.train = extract_pairs(splits.train, gold, opts);
  } else {
    out.train = extract_pairs(splits.train, spec, opts);
  }
  out.valid_seen = extract_pairs(splits.valid_seen, spec, opts, generated);
  out.valid_unseen = extract_pairs(splits.valid_unseen, spec, opts, generated);
  return out;
}

}  // namespace actsum
