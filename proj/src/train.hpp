#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "model.hpp"
#include "text.hpp"

namespace actsum {

struct TrainConfig {
  std::string optimizer = "adam";
  double learning_rate = 1e-3;
  int batch_size = 32;
  int max_epochs = 20;
  int patience = 3;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  double teacher_forcing = 1.0;
  // Distinct validation inputs decoded each epoch for model selection (0 = all).
  int valid_limit = 200;
  int min_freq = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_token_accuracy = 0.0;
  double valid_rouge_l = 0.0;
};

// Trained model plus everything needed to map text in and out of it.
struct Checkpoint {
  std::string task;
  RenderOptions render;  // how plan text inputs were rendered
  Vocab vocab;
  TrainConfig train;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  int max_target_len = 0;
  std::shared_ptr<const Seq2Seq> model;

  const ModelConfig& config() const { return model->config(); }
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Bytes of the serialized checkpoint (used for hashing and by save).
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

// One encoded pair.
struct Example {
  std::vector<int> source;
  const std::vector<FeatureGrid>* frames = nullptr;
  std::vector<int> target;
};

// Frames are attached only for models that read them.
std::vector<Example> encode_pairs(const PairDataset& pairs, const Vocab& vocab, ModelKind kind);
Vocab build_task_vocab(const PairDataset& train, int min_freq);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains from scratch. Keeps the parameters of the epoch with the best
// validation ROUGE-L F1 (the last epoch when there is no validation data).
Checkpoint train_model(const std::string& task, const ModelConfig& model_config, const TrainConfig& cfg,
                       const PairDataset& train, const PairDataset& valid, const EpochCallback& on_epoch = {});

// Lower-level loop over already encoded data; the model is updated in place.
std::vector<EpochRecord> fit(Seq2Seq& model, const TrainConfig& cfg, const std::vector<Example>& train,
                             const std::vector<Example>& valid, const Vocab& vocab, int max_len,
                             int* best_epoch, const EpochCallback& on_epoch = {});

// Token accuracy of teacher-forced argmax predictions over a dataset.
double token_accuracy(const Seq2Seq& model, const std::vector<Example>& data, int batch_size);

struct DecodeOptions {
  int beam = 1;  // 1 = greedy
  int max_len = 64;
};

// Decodes one input. Inputs are never batched with others, so the result
// depends on the checkpoint and this input only.
std::vector<int> decode_ids(const Seq2Seq& model, const Example& input, const DecodeOptions& opts);
Tokens decode(const Checkpoint& ckpt, const Pair& input, const DecodeOptions& opts);
DecodeOptions default_decode_options(const Checkpoint& ckpt);

// Relative error max |a - n| / max(1e-8, |a| + |n|) between analytic and
// central-difference gradients over every parameter entry.
struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool finite = true;
};

GradCheckResult grad_check(const ModelConfig& config, std::uint64_t seed, double h = 1e-5,
                           bool empty_targets = false);

}  // namespace actsum
