#include "model.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "text.hpp"

namespace actsum {

using ad::Matrix;
using ad::Var;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Text: return "text";
    case ModelKind::Vision: return "vision";
    case ModelKind::Multimodal: return "multimodal";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::Text, ModelKind::Vision, ModelKind::Multimodal})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

void ModelConfig::validate() const {
  if (net.embed_dim <= 0 || net.hidden_dim <= 0 || net.encoder_layers <= 0)
    throw DomainError("model config: dims must be positive");
  if (!(net.dropout >= 0.0 && net.dropout < 1.0)) throw DomainError("model config: dropout must be in [0, 1)");
  if (net.attention != "dot") throw DomainError("model config: only dot-product attention is supported");
  if (vocab_size <= Vocab::kUnknown) throw DomainError("model config: vocab must cover the special tokens");
  if (kind != ModelKind::Text) {
    const auto& v = vision;
    if (v.in_channels <= 0 || v.frame_height <= 0 || v.frame_width <= 0 || v.conv1_out <= 0 ||
        v.conv2_out <= 0)
      throw DomainError("model config: vision dims must be positive");
    if (v.kernel != 1) throw DomainError("model config: only 1x1 frame convolutions are supported");
  }
}

int ModelConfig::bridge_in() const {
  const int summary = directions() * net.hidden_dim;
  switch (kind) {
    case ModelKind::Text:
    case ModelKind::Vision: return summary + net.hidden_dim;
    case ModelKind::Multimodal: return 2 * summary + memory_dim();
  }
  return 0;
}

namespace {

void add_gru(std::vector<ParameterShape>& out, const std::string& prefix, Eigen::Index in, Eigen::Index h) {
  out.push_back({prefix + ".w_ih", in, 3 * h});
  out.push_back({prefix + ".w_hh", h, 3 * h});
  out.push_back({prefix + ".b_ih", 1, 3 * h});
  out.push_back({prefix + ".b_hh", 1, 3 * h});
}

void add_encoder(std::vector<ParameterShape>& out, const std::string& prefix, Eigen::Index in,
                 const ModelConfig& c) {
  for (int l = 0; l < c.net.encoder_layers; ++l) {
    const Eigen::Index layer_in = l == 0 ? in : c.memory_dim();
    const std::string lp = prefix + ".l" + std::to_string(l);
    add_gru(out, lp + ".fwd", layer_in, c.net.hidden_dim);
    if (c.net.bidirectional) add_gru(out, lp + ".bwd", layer_in, c.net.hidden_dim);
  }
}

}  // namespace

std::vector<ParameterShape> parameter_shapes(const ModelConfig& c) {
  c.validate();
  const Eigen::Index V = c.vocab_size, E = c.net.embed_dim, H = c.net.hidden_dim, D = c.memory_dim();
  std::vector<ParameterShape> out;
  if (c.kind != ModelKind::Vision) out.push_back({"src_embed", V, E});
  if (c.kind != ModelKind::Text) {
    out.push_back({"conv1.w", c.vision.conv1_out, c.vision.in_channels});
    out.push_back({"conv1.b", 1, c.vision.conv1_out});
    out.push_back({"conv2.w", c.vision.conv2_out, c.vision.conv1_out});
    out.push_back({"conv2.b", 1, c.vision.conv2_out});
  }
  switch (c.kind) {
    case ModelKind::Text: add_encoder(out, "enc", E, c); break;
    case ModelKind::Vision: add_encoder(out, "enc", c.frame_vector_dim(), c); break;
    case ModelKind::Multimodal:
      add_encoder(out, "img_enc", c.frame_vector_dim(), c);
      add_encoder(out, "txt_enc", E, c);
      break;
  }
  out.push_back({"dec_embed", V, E});
  add_gru(out, "dec", E, H);
  out.push_back({"attn.w_q", H, D});
  out.push_back({"ctx_proj.w", D, H});
  out.push_back({"ctx_proj.b", 1, H});
  if (c.kind == ModelKind::Multimodal) {
    out.push_back({"bridge_ctx.w", D, D});
    out.push_back({"bridge_ctx.b", 1, D});
  }
  out.push_back({"bridge.w", c.bridge_in(), H});
  out.push_back({"bridge.b", 1, H});
  out.push_back({"out.w", c.output_in(), V});
  out.push_back({"out.b", 1, V});
  return out;
}

std::size_t count_parameters(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& s : parameter_shapes(config)) n += static_cast<std::size_t>(s.rows * s.cols);
  return n;
}

SourceBatch make_source_batch(const ModelConfig& config, std::span<const SourceExample> examples) {
  if (examples.empty()) throw DomainError("empty batch");
  SourceBatch b;
  b.batch = static_cast<int>(examples.size());
  const bool text = config.kind != ModelKind::Vision;
  const bool frames = config.kind != ModelKind::Text;
  if (text) {
    for (const auto& e : examples) {
      if (e.text.empty()) throw DomainError("missing modality: text input is empty");
      b.text_lengths.push_back(static_cast<int>(e.text.size()));
    }
    b.text_steps = *std::max_element(b.text_lengths.begin(), b.text_lengths.end());
    b.text_ids.assign(static_cast<std::size_t>(b.text_steps * b.batch), Vocab::kPad);
    for (int i = 0; i < b.batch; ++i)
      for (int t = 0; t < b.text_lengths[static_cast<std::size_t>(i)]; ++t)
        b.text_ids[static_cast<std::size_t>(t * b.batch + i)] = examples[static_cast<std::size_t>(i)].text[static_cast<std::size_t>(t)];
  }
  if (frames) {
    const FeatureShape expected{static_cast<std::uint32_t>(config.vision.in_channels),
                                static_cast<std::uint32_t>(config.vision.frame_height),
                                static_cast<std::uint32_t>(config.vision.frame_width)};
    for (const auto& e : examples) {
      if (!e.frames || e.frames->empty()) throw DomainError("missing modality: no frames");
      b.frame_lengths.push_back(static_cast<int>(e.frames->size()));
    }
    b.frame_steps = *std::max_element(b.frame_lengths.begin(), b.frame_lengths.end());
    const auto F = static_cast<Eigen::Index>(expected.size());
    b.frames = Matrix::Zero(static_cast<Eigen::Index>(b.frame_steps) * b.batch, F);
    for (int i = 0; i < b.batch; ++i) {
      const auto& fr = *examples[static_cast<std::size_t>(i)].frames;
      for (std::size_t t = 0; t < fr.size(); ++t) {
        if (!(fr[t].shape() == expected))
          throw DomainError("frame dims " + std::to_string(fr[t].shape().channels) + "x" +
                            std::to_string(fr[t].shape().height) + "x" + std::to_string(fr[t].shape().width) +
                            " do not match the model's " + std::to_string(expected.channels) + "x" +
                            std::to_string(expected.height) + "x" + std::to_string(expected.width));
        const auto v = fr[t].values();
        b.frames.row(static_cast<Eigen::Index>(t) * b.batch + i) =
            Eigen::Map<const Eigen::RowVectorXf>(v.data(), F).cast<double>();
      }
    }
  }
  return b;
}

TargetBatch make_target_batch(std::span<const std::vector<int>> targets) {
  if (targets.empty()) throw DomainError("empty target batch");
  TargetBatch b;
  const int batch = static_cast<int>(targets.size());
  for (const auto& t : targets) b.steps = std::max(b.steps, static_cast<int>(t.size()) + 1);
  b.inputs.assign(static_cast<std::size_t>(b.steps * batch), Vocab::kPad);
  b.outputs.assign(static_cast<std::size_t>(b.steps * batch), Vocab::kPad);
  for (int i = 0; i < batch; ++i) {
    const auto& t = targets[static_cast<std::size_t>(i)];
    const int n = static_cast<int>(t.size());
    for (int s = 0; s <= n; ++s) {
      b.inputs[static_cast<std::size_t>(s * batch + i)] = s == 0 ? Vocab::kStart : t[static_cast<std::size_t>(s - 1)];
      b.outputs[static_cast<std::size_t>(s * batch + i)] = s == n ? Vocab::kEnd : t[static_cast<std::size_t>(s)];
    }
  }
  return b;
}

Seq2Seq::Seq2Seq(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  Rng rng(mix_seed(seed, 0x5eed));
  for (const auto& s : parameter_shapes(config_)) {
    Matrix m(s.rows, s.cols);
    const bool embed = s.name == "src_embed" || s.name == "dec_embed";
    // GRU tensors use 1/sqrt(hidden), linear maps 1/sqrt(fan_in).
    double bound;
    if (embed) {
      bound = 0.1;
    } else if (s.name.find(".w_") != std::string::npos || s.name.find(".b_") != std::string::npos) {
      bound = 1.0 / std::sqrt(static_cast<double>(config_.net.hidden_dim));
    } else if (s.name.ends_with(".b")) {
      const auto& w = std::find_if(params_.rbegin(), params_.rend(), [&](const ad::Parameter& p) {
        return p.name == s.name.substr(0, s.name.size() - 1) + "w";
      });
      const auto fan = w != params_.rend() ? (s.name.starts_with("conv") ? w->value.cols() : w->value.rows()) : 1;
      bound = 1.0 / std::sqrt(static_cast<double>(fan));
    } else if (s.name.starts_with("conv")) {
      bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
    } else {
      bound = 1.0 / std::sqrt(static_cast<double>(s.rows));
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
    params_.push_back({s.name, std::move(m)});
  }
  index_parameters();
}

Seq2Seq::Seq2Seq(ModelConfig config, std::vector<ad::Parameter> parameters)
    : config_(std::move(config)), params_(std::move(parameters)) {
  const auto shapes = parameter_shapes(config_);
  if (shapes.size() != params_.size())
    throw LoadError("parameter count " + std::to_string(params_.size()) + " does not match config (" +
                    std::to_string(shapes.size()) + ")");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const auto& p = params_[i];
    if (p.name != s.name || p.value.rows() != s.rows || p.value.cols() != s.cols)
      throw LoadError("parameter '" + p.name + "' does not match expected '" + s.name + "' " +
                      std::to_string(s.rows) + "x" + std::to_string(s.cols));
  }
  index_parameters();
}

void Seq2Seq::index_parameters() {
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].name, i);
}

const ad::Parameter& Seq2Seq::parameter(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::Internal, "no parameter '" + std::string(name) + "'");
  return params_[it->second];
}

Var Seq2Seq::p(ad::Graph& g, std::string_view name) const { return g.param(parameter(name)); }

Var Seq2Seq::gru_cell(ad::Graph& g, const std::string& prefix, Var gx, Var h) const {
  return ad::gru_cell(gx, 0, h, p(g, prefix + ".w_hh"), p(g, prefix + ".b_hh"));
}

Seq2Seq::EncoderOut Seq2Seq::run_encoder(ad::Graph& g, const std::string& prefix, Var inputs, int steps,
                                         int batch, std::span<const int> lengths, Rng* dropout_rng) const {
  const Eigen::Index H = config_.net.hidden_dim;
  const bool full = std::all_of(lengths.begin(), lengths.end(), [&](int l) { return l == steps; });
  std::vector<std::vector<double>> masks(static_cast<std::size_t>(steps), std::vector<double>(static_cast<std::size_t>(batch)));
  for (int t = 0; t < steps; ++t)
    for (int b = 0; b < batch; ++b)
      masks[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = t < lengths[static_cast<std::size_t>(b)] ? 1.0 : 0.0;

  EncoderOut out;
  Var layer_in = inputs;
  for (int l = 0; l < config_.net.encoder_layers; ++l) {
    if (l > 0 && dropout_rng && config_.net.dropout > 0.0) {
      const double keep = 1.0 - config_.net.dropout;
      Matrix mask(layer_in.rows(), layer_in.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      layer_in = ad::mul_constant(layer_in, mask);
    }
    const std::string lp = prefix + ".l" + std::to_string(l);
    std::vector<Var> fwd(static_cast<std::size_t>(steps)), bwd;
    const auto run = [&](const std::string& dp, bool reverse, std::vector<Var>& outs, Var& final_state) {
      Var gx_all = ad::add_bias(ad::matmul(layer_in, p(g, dp + ".w_ih")), p(g, dp + ".b_ih"));
      Var h = g.constant(Matrix::Zero(batch, H));
      Var w_hh = p(g, dp + ".w_hh"), b_hh = p(g, dp + ".b_hh");
      for (int k = 0; k < steps; ++k) {
        const int t = reverse ? steps - 1 - k : k;
        h = ad::gru_cell(gx_all, static_cast<Eigen::Index>(t) * batch, h, w_hh, b_hh,
                         full ? std::span<const double>() : std::span<const double>(masks[static_cast<std::size_t>(t)]));
        outs[static_cast<std::size_t>(t)] = h;
      }
      final_state = h;
    };
    Var final_f, final_b;
    run(lp + ".fwd", false, fwd, final_f);
    std::vector<Var> layer_out;
    if (config_.net.bidirectional) {
      bwd.resize(static_cast<std::size_t>(steps));
      run(lp + ".bwd", true, bwd, final_b);
      for (int t = 0; t < steps; ++t) {
        const Var parts[] = {fwd[static_cast<std::size_t>(t)], bwd[static_cast<std::size_t>(t)]};
        layer_out.push_back(ad::concat_cols(parts));
      }
    } else {
      layer_out = fwd;
    }
    out.outputs = layer_out;
    out.final_forward = final_f;
    out.final_backward = final_b;
    if (l + 1 < config_.net.encoder_layers) layer_in = ad::concat_rows(layer_out);
  }
  return out;
}

Var Seq2Seq::reduce_frames(ad::Graph& g, const Matrix& frames) const {
  const Eigen::Index pixels = static_cast<Eigen::Index>(config_.vision.frame_height) * config_.vision.frame_width;
  if (frames.cols() != config_.vision.in_channels * pixels)
    throw DomainError("reduce_frame: grid has " + std::to_string(frames.cols()) + " values, model expects " +
                      std::to_string(config_.vision.in_channels * pixels));
  Var x = g.constant(frames);
  Var h1 = ad::relu(ad::pointwise_conv(x, p(g, "conv1.w"), p(g, "conv1.b"), pixels));
  return ad::relu(ad::pointwise_conv(h1, p(g, "conv2.w"), p(g, "conv2.b"), pixels));
}

Seq2Seq::Encoded Seq2Seq::encode(ad::Graph& g, const SourceBatch& src, Rng* dropout_rng) const {
  Encoded enc;
  const auto summary = [](const EncoderOut& e) {
    std::vector<Var> parts{e.final_forward};
    if (e.final_backward.valid()) parts.push_back(e.final_backward);
    return parts;
  };
  std::vector<Var> bridge_parts;
  if (config_.kind == ModelKind::Text) {
    Var x = ad::embedding(p(g, "src_embed"), src.text_ids);
    auto e = run_encoder(g, "enc", x, src.text_steps, src.batch, src.text_lengths, dropout_rng);
    enc.memory = std::move(e.outputs);
    enc.lengths = src.text_lengths;
    bridge_parts = summary(e);
  } else {
    Var x = reduce_frames(g, src.frames);
    const std::string prefix = config_.kind == ModelKind::Vision ? "enc" : "img_enc";
    auto e = run_encoder(g, prefix, x, src.frame_steps, src.batch, src.frame_lengths, dropout_rng);
    enc.memory = std::move(e.outputs);
    enc.lengths = src.frame_lengths;
    bridge_parts = summary(e);
    if (config_.kind == ModelKind::Multimodal) {
      Var tx = ad::embedding(p(g, "src_embed"), src.text_ids);
      auto te = run_encoder(g, "txt_enc", tx, src.text_steps, src.batch, src.text_lengths, dropout_rng);
      enc.text_memory = std::move(te.outputs);
      for (auto& v : summary(te)) bridge_parts.push_back(v);
    }
  }
  enc.initial_context = ad::masked_mean(enc.memory, enc.lengths);
  if (config_.kind == ModelKind::Multimodal) {
    bridge_parts.push_back(ad::add_bias(ad::matmul(enc.initial_context, p(g, "bridge_ctx.w")), p(g, "bridge_ctx.b")));
  } else {
    bridge_parts.push_back(ad::add_bias(ad::matmul(enc.initial_context, p(g, "ctx_proj.w")), p(g, "ctx_proj.b")));
  }
  enc.bridge_input = ad::concat_cols(bridge_parts);
  enc.initial_hidden = ad::tanh(ad::add_bias(ad::matmul(enc.bridge_input, p(g, "bridge.w")), p(g, "bridge.b")));
  return enc;
}

Seq2Seq::Step Seq2Seq::step(ad::Graph& g, const Encoded& enc, Var hidden, std::span<const int> prev_tokens) const {
  Step s;
  Var e = ad::embedding(p(g, "dec_embed"), prev_tokens);
  Var gx = ad::add_bias(ad::matmul(e, p(g, "dec.w_ih")), p(g, "dec.b_ih"));
  s.hidden = gru_cell(g, "dec", gx, hidden);
  Var q = ad::matmul(s.hidden, p(g, "attn.w_q"));
  Var ctx = ad::attention(q, enc.memory, enc.lengths, &s.attention);
  Var pc = ad::add_bias(ad::matmul(ctx, p(g, "ctx_proj.w")), p(g, "ctx_proj.b"));
  const Var parts[] = {s.hidden, pc};
  s.logits = ad::add_bias(ad::matmul(ad::concat_cols(parts), p(g, "out.w")), p(g, "out.b"));
  return s;
}

Var Seq2Seq::loss(ad::Graph& g, const SourceBatch& src, const TargetBatch& tgt, Rng* dropout_rng,
                  double teacher_forcing, Rng* forcing_rng, LossStats* stats) const {
  const auto enc = encode(g, src, dropout_rng);
  const int B = src.batch;
  Var h = enc.initial_hidden;
  std::vector<Var> terms;
  std::vector<int> prev(tgt.inputs.begin(), tgt.inputs.begin() + B);
  long tokens = 0, correct = 0;
  for (int t = 0; t < tgt.steps; ++t) {
    auto s = step(g, enc, h, prev);
    const std::span<const int> out(tgt.outputs.data() + static_cast<std::ptrdiff_t>(t) * B, static_cast<std::size_t>(B));
    for (int v : out) tokens += v != Vocab::kPad;
    terms.push_back(ad::cross_entropy(s.logits, out, Vocab::kPad, &correct));
    h = s.hidden;
    if (t + 1 == tgt.steps) break;
    std::copy_n(tgt.inputs.begin() + static_cast<std::ptrdiff_t>(t + 1) * B, B, prev.begin());
    if (teacher_forcing < 1.0 && forcing_rng && forcing_rng->uniform() >= teacher_forcing) {
      // feed back the model's own argmax for rows still inside their target
      for (int b = 0; b < B; ++b) {
        auto& slot = prev[static_cast<std::size_t>(b)];
        if (slot == Vocab::kPad) continue;
        Eigen::Index arg = 0;
        s.logits.value().row(b).maxCoeff(&arg);
        slot = static_cast<int>(arg);
      }
    }
  }
  if (tokens == 0) throw DomainError("target batch has no tokens");
  Var total = ad::scale(ad::sum(terms), 1.0 / static_cast<double>(tokens));
  if (stats) {
    stats->tokens += tokens;
    stats->correct += correct;
    stats->loss_sum += total.value()(0, 0) * static_cast<double>(tokens);
  }
  return total;
}

std::vector<double> reduce_frame(const Seq2Seq& model, const FeatureGrid& grid) {
  ad::Graph g(false);
  const auto v = grid.values();
  Matrix row = Eigen::Map<const Eigen::RowVectorXf>(v.data(), static_cast<Eigen::Index>(v.size())).cast<double>();
  const auto& c = model.config().vision;
  if (grid.shape().channels != static_cast<std::uint32_t>(c.in_channels) ||
      grid.shape().height != static_cast<std::uint32_t>(c.frame_height) ||
      grid.shape().width != static_cast<std::uint32_t>(c.frame_width))
    throw DomainError("reduce_frame: grid dims do not match the model config");
  Var out = model.reduce_frames(g, row);
  return {out.value().data(), out.value().data() + out.value().size()};
}

}  // namespace actsum
