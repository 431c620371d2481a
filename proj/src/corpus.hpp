#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "text.hpp"
#include "trace.hpp"

namespace actsum {

enum class Split { Train, ValidSeen, ValidUnseen };
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view name);

struct SplitSet {
  std::vector<EpisodePtr> train;
  std::vector<EpisodePtr> valid_seen;
  std::vector<EpisodePtr> valid_unseen;

  const std::vector<EpisodePtr>& get(Split s) const;
  std::vector<EpisodePtr>& get(Split s);
};

// Throws LoadError when ids collide across splits or the environment
// relations (seen within train, unseen disjoint from train) do not hold.
void check_split_invariants(const SplitSet& splits);

std::size_t annotation_count(const std::vector<EpisodePtr>& episodes);

// Trajectory record: one JSON document per episode. features_path is resolved
// relative to the document's directory.
EpisodePtr load_trajectory(const std::filesystem::path& path);
void write_trajectory(const Episode& episode, const std::filesystem::path& json_path,
                      const std::string& features_path);

// Reads <dir>/{train,valid_seen,valid_unseen}/*.json in filename order.
SplitSet load_splits(const std::filesystem::path& dir);
// Writes trajectories and feature files under <dir>/<split>/.
void write_splits(const SplitSet& splits, const std::filesystem::path& dir);

struct DedupSplitReport {
  std::size_t annotations_before = 0;
  std::size_t annotations_after = 0;
  std::size_t episodes_before = 0;
  std::size_t episodes_after = 0;
};

struct DedupReport {
  DedupSplitReport valid_seen;
  DedupSplitReport valid_unseen;
  std::string key = "exact canonical high-level plan text";
  std::string granularity = "annotation";
};

struct DedupResult {
  SplitSet splits;
  DedupReport report;
};

// Removes every validation annotation whose canonical high-level plan string
// also occurs in train. Train is left untouched.
DedupResult dedup_validation(const SplitSet& splits);

enum class InputRepr { Pddl, Actions, Images, ImagesPddl, ImagesActions, GenPddl, GenActions };
enum class TargetKind { Summary, Instructions, Pddl, Actions };

std::string_view to_string(InputRepr r);
std::string_view to_string(TargetKind t);
std::optional<InputRepr> parse_input_repr(std::string_view s);
std::optional<TargetKind> parse_target_kind(std::string_view s);

struct TaskSpec {
  InputRepr input = InputRepr::Pddl;
  TargetKind target = TargetKind::Summary;

  bool uses_frames() const;
  // Text side of the input, if any: Pddl/Actions for plain, image+text and
  // generated representations.
  std::optional<InputRepr> text_input() const;
  bool is_generated() const {
    return input == InputRepr::GenPddl || input == InputRepr::GenActions;
  }
  bool operator==(const TaskSpec&) const = default;
};

// Throws DomainError for combinations outside the experiment grid.
void validate(const TaskSpec& spec);

// Short names such as "pddl2sum", "img2act", "imgpddl2inst", "genact2sum".
std::string task_name(const TaskSpec& spec);
TaskSpec parse_task_name(std::string_view name);

struct Pair {
  Tokens input;         // empty for image-only inputs
  EpisodePtr episode;   // frames come from here when the task uses images
  Tokens target;
  std::string episode_id;
  std::string annotator_id;
};

using PairDataset = std::vector<Pair>;

// Generated plan text per episode id, produced by a vision model.
struct GenerationSource {
  std::unordered_map<std::string, Tokens> plans;

  static GenerationSource load(const std::filesystem::path& tsv);
  void save(const std::filesystem::path& tsv) const;
};

struct RenderOptions {
  bool collapse_runs = false;
};

Tokens render_input_text(const Episode& e, InputRepr repr, const RenderOptions& opts);
Tokens render_target(const Episode& e, const Annotation* annotation, TargetKind target,
                     const RenderOptions& opts);
Tokens join_instructions(const std::vector<std::string>& instructions);

PairDataset extract_pairs(const std::vector<EpisodePtr>& episodes, const TaskSpec& spec,
                          const RenderOptions& opts = {},
                          const GenerationSource* generated = nullptr);

struct SplitPairs {
  PairDataset train;
  PairDataset valid_seen;
  PairDataset valid_unseen;
};

SplitPairs extract_pairs(const SplitSet& splits, const TaskSpec& spec,
                         const RenderOptions& opts = {},
                         const GenerationSource* generated = nullptr);

}  // namespace actsum
