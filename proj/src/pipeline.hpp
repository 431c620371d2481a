#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "synthgen.hpp"
#include "train.hpp"

namespace actsum {

ModelKind model_kind_for(const TaskSpec& spec);

struct PipelineItem {
  std::string episode_id;
  std::string annotator_id;
  Tokens plan;       // stage-1 output (or gold plan for the oracle)
  Tokens output;     // stage-2 output
  Tokens reference;  // gold target text
};

// Stage 1 decodes plan text from frames with `vision`; stage 2 decodes the
// target from that plan with `text`. A null `vision` substitutes gold plan
// text (oracle stage 1). Plan text is rendered the way `text` was trained. Plans travel through a GenerationSource, the same
// route used for generated-plan rows.
std::vector<PipelineItem> run_pipeline(const Checkpoint* vision, const Checkpoint& text,
                                       const std::vector<EpisodePtr>& episodes, TargetKind target,
                                       const std::filesystem::path& plan_dump = {});

// The direct route: the plain text model on gold plan input.
std::vector<PipelineItem> run_direct(const Checkpoint& text, const std::vector<EpisodePtr>& episodes,
                                     TargetKind target);

// Decodes every pair of a non-generated task, one decode per distinct input.
std::vector<PipelineItem> decode_episodes(const Checkpoint& ckpt, const std::vector<EpisodePtr>& episodes, int beam,
                                          int max_len = 0);

// Stage-1 plans for a list of episodes.
GenerationSource generate_plans(const Checkpoint& vision, const std::vector<EpisodePtr>& episodes);

// Reference values for the 16 task rows, in Table 2 order: R-1, R-2, R-L,
// BLEU, BLEU-1 for seen then unseen.
struct ReferenceScores {
  std::array<double, 5> seen;
  std::array<double, 5> unseen;
};
const std::vector<std::string>& matrix_task_names();
std::optional<ReferenceScores> reference_scores(const std::string& task);
// Table 1 no-error percentages, keyed by task where the paper reports one.
std::optional<double> reference_no_errors(const std::string& task);

struct MatrixConfig {
  std::vector<std::string> rows = matrix_task_names();
  ModelConfig model;  // kind and vocab are set per row
  TrainConfig train;
  std::map<std::string, nlohmann::json> overrides;  // task -> {"model": {...}, "train": {...}}
  RenderOptions render;
  int beam = 1;
  std::filesystem::path output_dir;
  bool reuse_checkpoints = true;
};

struct MatrixRowResult {
  std::string task;
  std::optional<ScoreRow> seen;
  std::optional<ScoreRow> unseen;
  std::optional<ErrorRow> seen_errors;  // summary rows on synthetic data
  std::optional<ErrorRow> unseen_errors;
  std::string error;  // non-empty when the row failed
};

struct ScoreTable {
  std::vector<MatrixRowResult> rows;

  const MatrixRowResult* find(const std::string& task) const;
  std::string tsv() const;
  // Fixed-width table with reference values on the line under each row.
  std::string format(bool with_reference = true) const;
  std::string error_tsv() const;
};

using LogFn = std::function<void(const std::string&)>;

// Checkpoints are cached under output_dir/checkpoints and reused while their
// config and corpus fingerprint match. Per-row generations are dumped under
// output_dir/<task>/.
ScoreTable run_matrix(const MatrixConfig& config, const SplitSet& splits, const synth::Lexicon& lexicon,
                      const LogFn& log = {});

// Trains, or loads when a matching cached checkpoint exists.
Checkpoint obtain_checkpoint(const std::string& task, const MatrixConfig& config, const SplitSet& splits,
                             const LogFn& log = {});

std::uint64_t corpus_fingerprint(const SplitSet& splits);
ModelConfig row_model_config(const std::string& task, const MatrixConfig& config);
TrainConfig row_train_config(const std::string& task, const MatrixConfig& config);

}  // namespace actsum
