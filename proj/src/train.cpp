#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "config.hpp"
#include "error.hpp"
#include "metrics.hpp"

namespace actsum {

using ad::Matrix;

void TrainConfig::validate() const {
  if (optimizer != "adam") throw DomainError("train: only the adam optimizer is implemented");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw DomainError("train: learning rate must be >= 0");
  if (batch_size < 1) throw DomainError("train: batch size must be >= 1");
  if (max_epochs < 1) throw DomainError("train: max_epochs must be >= 1");
  if (patience < 1) throw DomainError("train: patience must be >= 1");
  if (!(clip_norm > 0.0)) throw DomainError("train: clip norm must be > 0");
  if (!(teacher_forcing >= 0.0 && teacher_forcing <= 1.0)) throw DomainError("train: teacher forcing must be in [0, 1]");
  if (valid_limit < 0) throw DomainError("train: valid_limit must be >= 0");
  if (min_freq < 1) throw DomainError("train: min_freq must be >= 1");
}

Vocab build_task_vocab(const PairDataset& train, int min_freq) {
  std::vector<Tokens> texts;
  texts.reserve(train.size() * 2);
  for (const auto& p : train) {
    if (!p.input.empty()) texts.push_back(p.input);
    texts.push_back(p.target);
  }
  return build_vocab(texts, min_freq);
}

std::vector<Example> encode_pairs(const PairDataset& pairs, const Vocab& vocab, ModelKind kind) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Example e;
    e.source = vocab.encode(p.input);
    if (kind != ModelKind::Text) {
      if (!p.episode) throw DomainError("pair for episode '" + p.episode_id + "' has no frames");
      e.frames = &p.episode->frames->frames();
    }
    e.target = vocab.encode(p.target);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::size_t source_length(const Example& e) {
  return std::max(e.source.size(), e.frames ? e.frames->size() : std::size_t{0});
}

// Batches of similar source length, in a seeded random order.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data, int batch_size, Rng& rng) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto la = source_length(data[a]), lb = source_length(data[b]);
    if (la != lb) return la < lb;
    return data[a].target.size() < data[b].target.size();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size))
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + static_cast<std::size_t>(batch_size))));
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

struct Batch {
  SourceBatch src;
  TargetBatch tgt;
};

Batch assemble(const ModelConfig& config, const std::vector<Example>& data, const std::vector<std::size_t>& idx) {
  std::vector<SourceExample> src;
  std::vector<std::vector<int>> tgt;
  src.reserve(idx.size());
  for (auto i : idx) {
    src.push_back({data[i].source, data[i].frames});
    tgt.push_back(data[i].target);
  }
  return {make_source_batch(config, src), make_target_batch(tgt)};
}

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<Matrix> m, v;

  explicit Adam(const std::vector<ad::Parameter>& params) {
    for (const auto& p : params) {
      m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }

  void update(std::vector<ad::Parameter>& params, const std::vector<const Matrix*>& grads, double lr, double scale) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!grads[i]) continue;
      const auto g = grads[i]->array() * scale;
      m[i].array() = beta1 * m[i].array() + (1.0 - beta1) * g;
      v[i].array() = beta2 * v[i].array() + (1.0 - beta2) * g.square();
      params[i].value.array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
    }
  }
};

}  // namespace

double token_accuracy(const Seq2Seq& model, const std::vector<Example>& data, int batch_size) {
  Seq2Seq::LossStats stats;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    idx.push_back(i);
    if (idx.size() == static_cast<std::size_t>(batch_size) || i + 1 == data.size()) {
      ad::Graph g(false);
      const auto b = assemble(model.config(), data, idx);
      model.loss(g, b.src, b.tgt, nullptr, 1.0, nullptr, &stats);
      idx.clear();
    }
  }
  return stats.tokens ? static_cast<double>(stats.correct) / static_cast<double>(stats.tokens) : 0.0;
}

std::vector<EpochRecord> fit(Seq2Seq& model, const TrainConfig& cfg, const std::vector<Example>& train,
                             const std::vector<Example>& valid, const Vocab& vocab, int max_len, int* best_epoch,
                             const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw DomainError("train: no training pairs");
  Adam adam(model.parameters());
  std::vector<EpochRecord> history;
  std::vector<ad::Parameter> best_params;
  double best_score = -1.0;
  int bad_epochs = 0;
  DecodeOptions dopts;
  dopts.max_len = std::max(1, max_len);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng order_rng(mix_seed(mix_seed(cfg.seed, 0x0b), static_cast<std::uint64_t>(epoch)));
    Rng dropout_rng(mix_seed(mix_seed(cfg.seed, 0xd0), static_cast<std::uint64_t>(epoch)));
    Rng forcing_rng(mix_seed(mix_seed(cfg.seed, 0x7f), static_cast<std::uint64_t>(epoch)));
    Seq2Seq::LossStats stats;
    const auto batches = make_batches(train, cfg.batch_size, order_rng);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto b = assemble(model.config(), train, batches[bi]);
      ad::Graph g(true);
      const auto loss = model.loss(g, b.src, b.tgt, &dropout_rng, cfg.teacher_forcing, &forcing_rng, &stats);
      const double lv = loss.value()(0, 0);
      if (!std::isfinite(lv))
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) +
                           " (first example " + std::to_string(batches[bi].front()) + ")");
      g.backward(loss);
      std::vector<const Matrix*> grads;
      double sq = 0.0;
      for (const auto& p : model.parameters()) {
        const Matrix* gr = g.param_grad(p);
        grads.push_back(gr);
        if (gr) sq += gr->squaredNorm();
      }
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm))
        throw NumericError("non-finite gradient in epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
      const double scale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      if (cfg.learning_rate > 0.0) adam.update(model.parameters(), grads, cfg.learning_rate, scale);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = stats.tokens ? stats.loss_sum / static_cast<double>(stats.tokens) : 0.0;
    rec.train_token_accuracy = stats.tokens ? static_cast<double>(stats.correct) / static_cast<double>(stats.tokens) : 0.0;
    if (!valid.empty()) {
      // decoding is a function of the input, so shared inputs decode once
      std::map<std::pair<std::vector<int>, const void*>, std::vector<int>> cache;
      double sum = 0.0;
      std::size_t scored = 0;
      for (const auto& ex : valid) {
        const auto key = std::make_pair(ex.source, static_cast<const void*>(ex.frames));
        auto it = cache.find(key);
        if (it == cache.end()) {
          if (cfg.valid_limit > 0 && cache.size() >= static_cast<std::size_t>(cfg.valid_limit)) continue;
          it = cache.emplace(key, decode_ids(model, ex, dopts)).first;
        }
        const Tokens ref = vocab.decode(ex.target);
        const Tokens hyp = vocab.decode(it->second);
        sum += rouge_l(hyp, std::span<const Tokens>(&ref, 1));
        ++scored;
      }
      rec.valid_rouge_l = sum / static_cast<double>(scored);
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (valid.empty() || rec.valid_rouge_l > best_score) {
      best_score = rec.valid_rouge_l;
      best_params = model.parameters();
      if (best_epoch) *best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }
  model.parameters() = std::move(best_params);
  return history;
}

Checkpoint train_model(const std::string& task, const ModelConfig& model_config, const TrainConfig& cfg,
                       const PairDataset& train, const PairDataset& valid, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.empty()) throw DomainError("train: no training pairs");
  Checkpoint ckpt;
  ckpt.task = task;
  ckpt.train = cfg;
  ckpt.vocab = build_task_vocab(train, cfg.min_freq);
  ModelConfig mc = model_config;
  mc.vocab_size = ckpt.vocab.size();
  auto model = std::make_shared<Seq2Seq>(mc, cfg.seed);
  const auto train_ex = encode_pairs(train, ckpt.vocab, mc.kind);
  const auto valid_ex = encode_pairs(valid, ckpt.vocab, mc.kind);
  for (const auto& e : train_ex) ckpt.max_target_len = std::max(ckpt.max_target_len, static_cast<int>(e.target.size()));
  ckpt.history = fit(*model, cfg, train_ex, valid_ex, ckpt.vocab, ckpt.max_target_len + 8, &ckpt.best_epoch, on_epoch);
  ckpt.model = std::move(model);
  return ckpt;
}

std::vector<int> decode_ids(const Seq2Seq& model, const Example& input, const DecodeOptions& opts) {
  if (opts.max_len < 1) throw DomainError("decode: max_len must be >= 1");
  if (opts.beam < 1) throw DomainError("decode: beam width must be >= 1");
  ad::Graph g(false);
  const SourceExample ex{input.source, input.frames};
  const auto src = make_source_batch(model.config(), std::span<const SourceExample>(&ex, 1));
  const auto enc = model.encode(g, src);

  struct Hyp {
    std::vector<int> ids;
    double logp = 0.0;
    ad::Var hidden;
  };
  std::vector<Hyp> alive{{{}, 0.0, enc.initial_hidden}};
  std::vector<Hyp> finished;
  const auto k = static_cast<std::size_t>(opts.beam);

  for (int t = 0; t < opts.max_len && !alive.empty(); ++t) {
    struct Cand {
      double logp;
      std::size_t hyp;
      int token;
      ad::Var hidden;
    };
    std::vector<Cand> cands;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const int prev = alive[h].ids.empty() ? Vocab::kStart : alive[h].ids.back();
      const auto s = model.step(g, enc, alive[h].hidden, std::span<const int>(&prev, 1));
      const Eigen::VectorXd lp = ad::log_softmax(s.logits.value().row(0));
      std::vector<int> top(static_cast<std::size_t>(lp.size()));
      std::iota(top.begin(), top.end(), 0);
      const auto keep = std::min(k, top.size());
      std::partial_sort(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(keep), top.end(),
                        [&](int a, int b) { return lp[a] != lp[b] ? lp[a] > lp[b] : a < b; });
      for (std::size_t j = 0; j < keep; ++j) cands.push_back({alive[h].logp + lp[top[j]], h, top[j], s.hidden});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.logp > b.logp; });
    std::vector<Hyp> next;
    for (const auto& c : cands) {
      if (next.size() + finished.size() >= k) break;
      Hyp h{alive[c.hyp].ids, c.logp, c.hidden};
      if (c.token == Vocab::kEnd) {
        finished.push_back(std::move(h));
      } else {
        h.ids.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    if (finished.size() >= k) break;
  }
  for (auto& h : alive) finished.push_back(std::move(h));
  // length-normalised log-probability; the end token counts toward length
  const auto norm = [](const Hyp& h) { return h.logp / static_cast<double>(h.ids.size() + 1); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i)
    if (norm(finished[i]) > norm(finished[best])) best = i;
  return finished[best].ids;
}

Tokens decode(const Checkpoint& ckpt, const Pair& input, const DecodeOptions& opts) {
  Example e;
  e.source = ckpt.vocab.encode(input.input);
  if (input.episode && ckpt.config().kind != ModelKind::Text) e.frames = &input.episode->frames->frames();
  return ckpt.vocab.decode(decode_ids(*ckpt.model, e, opts));
}

DecodeOptions default_decode_options(const Checkpoint& ckpt) {
  DecodeOptions o;
  o.max_len = std::max(1, ckpt.max_target_len + 8);
  return o;
}

// ---- checkpoint container ----

namespace {

constexpr char kMagic[8] = {'A', 'C', 'T', 'S', 'U', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    bytes(b, 8);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  void need(std::size_t n, const char* what) {
    if (pos_ + n > s_.size()) throw LoadError(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
  std::string str(const char* what) {
    const auto n = u32(what);
    need(n, what);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.config().kind));
  w.str(ckpt.task);
  const nlohmann::json cfg{{"model", to_json(ckpt.config())},
                           {"train", to_json(ckpt.train)},
                           {"render", {{"collapse_runs", ckpt.render.collapse_runs}}}};
  w.str(cfg.dump());
  w.u32(static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const auto& t : ckpt.vocab.tokens()) w.str(t);
  w.u32(static_cast<std::uint32_t>(ckpt.max_target_len));
  w.u32(static_cast<std::uint32_t>(ckpt.best_epoch));
  w.u32(static_cast<std::uint32_t>(ckpt.history.size()));
  for (const auto& h : ckpt.history) {
    w.u32(static_cast<std::uint32_t>(h.epoch));
    w.f64(h.train_loss);
    w.f64(h.train_token_accuracy);
    w.f64(h.valid_rouge_l);
  }
  const auto& params = ckpt.model->parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) w.f64(p.value.data()[i]);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) throw LoadError("not a checkpoint file (bad magic)");
  const auto version = r.u32("version");
  if (version != kVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  const auto kind = r.u32("kind");
  Checkpoint ckpt;
  ckpt.task = r.str("task");
  ModelConfig mc;
  try {
    const auto cfg = nlohmann::json::parse(r.str("config"));
    merge_json(cfg.at("model"), mc);
    merge_json(cfg.at("train"), ckpt.train);
    ckpt.render.collapse_runs = cfg.at("render").at("collapse_runs").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint config block: ") + e.what());
  } catch (const DomainError& e) {
    throw LoadError(std::string("checkpoint config block: ") + e.what());
  }
  if (static_cast<std::uint32_t>(mc.kind) != kind) throw LoadError("checkpoint header kind does not match its config");
  const auto nv = r.u32("vocab size");
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < nv; ++i) tokens.push_back(r.str("vocab"));
  ckpt.vocab = Vocab(std::move(tokens));
  if (ckpt.vocab.size() != mc.vocab_size) throw LoadError("checkpoint vocab size does not match its config");
  ckpt.max_target_len = static_cast<int>(r.u32("max target length"));
  ckpt.best_epoch = static_cast<int>(r.u32("best epoch"));
  const auto nh = r.u32("history");
  for (std::uint32_t i = 0; i < nh; ++i) {
    EpochRecord h;
    h.epoch = static_cast<int>(r.u32("history"));
    h.train_loss = r.f64("history");
    h.train_token_accuracy = r.f64("history");
    h.valid_rouge_l = r.f64("history");
    if (!ckpt.history.empty() && h.epoch <= ckpt.history.back().epoch) throw LoadError("checkpoint history is not ordered by epoch");
    ckpt.history.push_back(h);
  }
  const auto np = r.u32("parameter count");
  std::vector<ad::Parameter> params;
  for (std::uint32_t i = 0; i < np; ++i) {
    ad::Parameter p;
    p.name = r.str("parameter name");
    const auto rows = r.u32("parameter shape"), cols = r.u32("parameter shape");
    r.need(static_cast<std::size_t>(rows) * cols * 8, "parameter values");
    p.value.resize(rows, cols);
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = r.f64("parameter values");
    params.push_back(std::move(p));
  }
  if (!r.done()) throw LoadError("trailing bytes after checkpoint parameters");
  ckpt.model = std::make_shared<Seq2Seq>(mc, std::move(params));
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

// ---- gradient check ----

GradCheckResult grad_check(const ModelConfig& config, std::uint64_t seed, double h, bool empty_targets) {
  ModelConfig mc = config;
  mc.net.dropout = 0.0;
  Seq2Seq model(mc, seed);
  Rng rng(mix_seed(seed, 0x9c));
  const int batch = 3;
  std::vector<std::vector<int>> sources(batch), targets(batch);
  std::vector<std::vector<FeatureGrid>> frames(batch);
  const FeatureShape shape{static_cast<std::uint32_t>(mc.vision.in_channels),
                           static_cast<std::uint32_t>(mc.vision.frame_height),
                           static_cast<std::uint32_t>(mc.vision.frame_width)};
  for (int b = 0; b < batch; ++b) {
    const int src_len = 2 + b;  // unequal lengths exercise the masking
    for (int t = 0; t < src_len; ++t) sources[static_cast<std::size_t>(b)].push_back(static_cast<int>(rng.integer(Vocab::kUnknown, mc.vocab_size - 1)));
    if (mc.kind != ModelKind::Text)
      for (int t = 0; t < 4 - b; ++t) {
        std::vector<float> v(shape.size());
        for (auto& x : v) x = static_cast<float>(rng.normal());
        frames[static_cast<std::size_t>(b)].emplace_back(shape, std::move(v));
      }
    if (!empty_targets)
      for (int t = 0; t < 1 + b; ++t) targets[static_cast<std::size_t>(b)].push_back(static_cast<int>(rng.integer(Vocab::kUnknown, mc.vocab_size - 1)));
  }
  std::vector<SourceExample> ex;
  for (int b = 0; b < batch; ++b) ex.push_back({sources[static_cast<std::size_t>(b)], mc.kind == ModelKind::Text ? nullptr : &frames[static_cast<std::size_t>(b)]});
  const auto src = make_source_batch(mc, ex);
  const auto tgt = make_target_batch(targets);

  const auto eval = [&] {
    ad::Graph g(false);
    return model.loss(g, src, tgt, nullptr, 1.0, nullptr, nullptr).value()(0, 0);
  };
  std::vector<Matrix> analytic;
  {
    ad::Graph g(true);
    const auto loss = model.loss(g, src, tgt, nullptr, 1.0, nullptr, nullptr);
    g.backward(loss);
    for (const auto& p : model.parameters()) {
      const Matrix* gr = g.param_grad(p);
      analytic.push_back(gr ? *gr : Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  GradCheckResult res;
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (Eigen::Index k = 0; k < params[i].value.size(); ++k) {
      double& x = params[i].value.data()[k];
      const double orig = x;
      x = orig + h;
      const double up = eval();
      x = orig - h;
      const double down = eval();
      x = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i].data()[k];
      if (!std::isfinite(a) || !std::isfinite(numeric)) res.finite = false;
      const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      if (rel > res.max_relative_error) {
        res.max_relative_error = rel;
        res.worst_parameter = params[i].name;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace actsum
