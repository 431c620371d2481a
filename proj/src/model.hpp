#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "rng.hpp"
#include "trace.hpp"

namespace actsum {

enum class ModelKind { Text, Vision, Multimodal };
std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

struct TransducerConfig {
  int embed_dim = 64;
  int hidden_dim = 64;
  int encoder_layers = 3;
  bool bidirectional = true;
  double dropout = 0.1;
  std::string attention = "dot";
};

// Frame reduction ahead of the recurrent encoder: two 1x1 convolutions with
// rectifiers over channels x height x width grids.
struct VisionConfig {
  int in_channels = 64;
  int frame_height = 4;
  int frame_width = 4;
  int conv1_out = 16;
  int conv2_out = 8;
  int kernel = 1;
};

struct ModelConfig {
  ModelKind kind = ModelKind::Text;
  TransducerConfig net;
  VisionConfig vision;
  int vocab_size = 0;

  void validate() const;
  int directions() const { return net.bidirectional ? 2 : 1; }
  int memory_dim() const { return directions() * net.hidden_dim; }
  int frame_vector_dim() const { return vision.conv2_out * vision.frame_height * vision.frame_width; }
  // Input width of the layer that seeds the decoder state.
  int bridge_in() const;
  // Input width of the output projection.
  int output_in() const { return 2 * net.hidden_dim; }
};

struct ParameterShape {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

std::vector<ParameterShape> parameter_shapes(const ModelConfig& config);
std::size_t count_parameters(const ModelConfig& config);

// Time-major batch of sources. Token row t*batch+b is step t of example b;
// frames use the same layout with one flattened grid per row.
struct SourceBatch {
  int batch = 0;
  int text_steps = 0;
  std::vector<int> text_ids;
  std::vector<int> text_lengths;
  int frame_steps = 0;
  ad::Matrix frames;
  std::vector<int> frame_lengths;
};

// Decoder inputs start with the start id; outputs end with the end id.
// Both are time-major and padded with the pad id.
struct TargetBatch {
  int steps = 0;
  std::vector<int> inputs;
  std::vector<int> outputs;
};

struct SourceExample {
  std::span<const int> text;                    // empty when unused
  const std::vector<FeatureGrid>* frames = nullptr;
};

SourceBatch make_source_batch(const ModelConfig& config, std::span<const SourceExample> examples);
TargetBatch make_target_batch(std::span<const std::vector<int>> targets);

class Seq2Seq {
 public:
  // Fresh parameters drawn from a stream seeded with `seed`.
  Seq2Seq(ModelConfig config, std::uint64_t seed);
  // Restores parameters; names and shapes must match the config exactly.
  Seq2Seq(ModelConfig config, std::vector<ad::Parameter> parameters);

  const ModelConfig& config() const { return config_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  std::vector<ad::Parameter>& parameters() { return params_; }
  const ad::Parameter& parameter(std::string_view name) const;

  struct Encoded {
    std::vector<ad::Var> memory;   // attended positions, batch x memory_dim each
    std::vector<int> lengths;
    ad::Var initial_context;       // mean of memory over valid positions
    ad::Var bridge_input;
    ad::Var initial_hidden;
    std::vector<ad::Var> text_memory;  // multimodal only
  };

  struct Step {
    ad::Var hidden;
    ad::Var logits;
    ad::Matrix attention;  // batch x positions
  };

  struct LossStats {
    long tokens = 0;
    long correct = 0;
    double loss_sum = 0.0;
  };

  // dropout_rng enables dropout between recurrent layers (training only).
  Encoded encode(ad::Graph& g, const SourceBatch& src, Rng* dropout_rng = nullptr) const;
  Step step(ad::Graph& g, const Encoded& enc, ad::Var hidden, std::span<const int> prev_tokens) const;

  // Mean token cross-entropy over non-pad target positions. teacher_forcing
  // below 1 feeds back the model's own argmax at randomly chosen steps.
  ad::Var loss(ad::Graph& g, const SourceBatch& src, const TargetBatch& tgt, Rng* dropout_rng,
               double teacher_forcing, Rng* forcing_rng, LossStats* stats) const;

  // Frame vectors (batch rows of conv2_out*H*W) for flattened grids.
  ad::Var reduce_frames(ad::Graph& g, const ad::Matrix& frames) const;

 private:
  struct EncoderOut {
    std::vector<ad::Var> outputs;
    ad::Var final_forward;
    ad::Var final_backward;  // invalid when unidirectional
  };

  EncoderOut run_encoder(ad::Graph& g, const std::string& prefix, ad::Var inputs, int steps,
                         int batch, std::span<const int> lengths, Rng* dropout_rng) const;
  ad::Var gru_cell(ad::Graph& g, const std::string& prefix, ad::Var gx, ad::Var h) const;
  ad::Var p(ad::Graph& g, std::string_view name) const;
  void index_parameters();

  ModelConfig config_;
  std::vector<ad::Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Applies the two-convolution reduction to a single grid.
std::vector<double> reduce_frame(const Seq2Seq& model, const FeatureGrid& grid);

}  // namespace actsum
