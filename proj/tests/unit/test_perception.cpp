#include <doctest.h>

#include "error.hpp"
#include "model.hpp"
#include "support/fixtures.hpp"
#include "train.hpp"

using namespace actsum;

namespace {

ModelConfig small(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.net.embed_dim = 6;
  c.net.hidden_dim = 6;
  c.net.encoder_layers = 2;
  c.net.dropout = 0.0;
  c.vision = {4, 2, 2, 3, 2, 1};
  c.vocab_size = 9;
  return c;
}

ModelConfig paper_dims(ModelKind kind, int vocab) {
  ModelConfig c;
  c.kind = kind;
  c.net = {512, 512, 3, true, 0.1, "dot"};
  c.vision = {512, 7, 7, 128, 32, 1};
  c.vocab_size = vocab;
  return c;
}

std::vector<FeatureGrid> grids(int n, std::uint64_t seed, FeatureShape shape = {4, 2, 2}) {
  Rng r(seed);
  std::vector<FeatureGrid> out;
  for (int i = 0; i < n; ++i) {
    std::vector<float> v(shape.size());
    for (auto& x : v) x = static_cast<float>(r.normal());
    out.emplace_back(shape, v);
  }
  return out;
}

ad::Parameter& named(Seq2Seq& m, const std::string& name) {
  for (auto& p : m.parameters())
    if (p.name == name) return p;
  throw std::runtime_error("no parameter " + name);
}

}  // namespace

TEST_CASE("frame reduction output length") {
  ModelConfig desk = small(ModelKind::Vision);
  desk.vision = {64, 4, 4, 16, 8, 1};
  CHECK(desk.frame_vector_dim() == 128);
  Seq2Seq m(desk, 1);
  CHECK(reduce_frame(m, grids(1, 1, {64, 4, 4})[0]).size() == 128);
  CHECK(paper_dims(ModelKind::Vision, 100).frame_vector_dim() == 32 * 7 * 7);
  CHECK_THROWS_AS(reduce_frame(m, grids(1, 1, {32, 4, 4})[0]), DomainError);
}

TEST_CASE("zero grid with zero biases reduces to zero") {
  Seq2Seq m(small(ModelKind::Vision), 3);
  named(m, "conv1.b").value.setZero();
  named(m, "conv2.b").value.setZero();
  const FeatureGrid zero({4, 2, 2}, std::vector<float>(16, 0.f));
  for (double v : reduce_frame(m, zero)) CHECK(v == 0.0);
  // rectifier: outputs are never negative
  for (const auto& g : grids(5, 9))
    for (double v : reduce_frame(m, g)) CHECK(v >= 0.0);
}

TEST_CASE("paper dims reproduce the stated layer widths") {
  CHECK(paper_dims(ModelKind::Vision, 100).bridge_in() == 1536);
  CHECK(paper_dims(ModelKind::Text, 100).bridge_in() == 1536);
  CHECK(paper_dims(ModelKind::Multimodal, 100).bridge_in() == 3072);
  CHECK(paper_dims(ModelKind::Vision, 100).output_in() == 1024);
  for (auto kind : {ModelKind::Vision, ModelKind::Multimodal})
    MESSAGE(to_string(kind) << " parameters at paper dims, vocab 2000: " << count_parameters(paper_dims(kind, 2000)));
}

TEST_CASE("encoder emits one bidirectional vector per frame") {
  const auto c = small(ModelKind::Vision);
  Seq2Seq m(c, 2);
  const auto fr = grids(5, 4);
  const SourceExample ex{{}, &fr};
  ad::Graph g(false);
  const auto enc = m.encode(g, make_source_batch(c, std::span<const SourceExample>(&ex, 1)));
  CHECK(enc.memory.size() == 5);
  CHECK(enc.memory[0].cols() == 2 * c.net.hidden_dim);
}

TEST_CASE("frame order matters") {
  const auto c = small(ModelKind::Vision);
  Seq2Seq m(c, 2);
  const auto fr = grids(2, 5);
  const std::vector<FeatureGrid> swapped = {fr[1], fr[0]};
  const auto last = [&](const std::vector<FeatureGrid>& f) {
    const SourceExample ex{{}, &f};
    ad::Graph g(false);
    return m.encode(g, make_source_batch(c, std::span<const SourceExample>(&ex, 1))).initial_hidden.value();
  };
  CHECK((last(fr) - last(swapped)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("text reaches the multimodal decoder only through the bridge") {
  const auto c = small(ModelKind::Multimodal);
  Seq2Seq m(c, 8);
  const auto fr = grids(4, 6);
  const std::vector<int> text = {4, 5, 6}, other = {7, 8, 4};
  const auto run = [&](const std::vector<int>& t) {
    const SourceExample ex{t, &fr};
    ad::Graph g(false);
    const auto enc = m.encode(g, make_source_batch(c, std::span<const SourceExample>(&ex, 1)));
    std::vector<ad::Matrix> mem;
    for (const auto& v : enc.memory) mem.push_back(v.value());
    return std::make_tuple(mem, enc.initial_context.value(), enc.initial_hidden.value());
  };
  const auto [mem_a, ctx_a, h_a] = run(text);
  const auto [mem_b, ctx_b, h_b] = run(other);
  REQUIRE(mem_a.size() == 4);
  for (std::size_t i = 0; i < mem_a.size(); ++i) CHECK(mem_a[i] == mem_b[i]);
  CHECK(ctx_a == ctx_b);
  CHECK((h_a - h_b).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("missing modality is a domain error") {
  const auto c = small(ModelKind::Multimodal);
  const auto fr = grids(3, 1);
  const std::vector<int> text = {4, 5};
  const SourceExample no_frames{text, nullptr};
  CHECK_THROWS_AS(make_source_batch(c, std::span<const SourceExample>(&no_frames, 1)), DomainError);
  const SourceExample no_text{{}, &fr};
  CHECK_THROWS_AS(make_source_batch(c, std::span<const SourceExample>(&no_text, 1)), DomainError);
  const auto v = small(ModelKind::Vision);
  CHECK_THROWS_AS(make_source_batch(v, std::span<const SourceExample>(&no_frames, 1)), DomainError);
  const auto wrong = grids(2, 1, {4, 3, 3});
  const SourceExample bad{{}, &wrong};
  CHECK_THROWS_AS(make_source_batch(v, std::span<const SourceExample>(&bad, 1)), DomainError);
}

TEST_CASE("vision and multimodal gradients match finite differences") {
  for (auto kind : {ModelKind::Vision, ModelKind::Multimodal}) {
    const auto r = grad_check(small(kind), 3);
    INFO(to_string(kind) << " worst " << r.worst_parameter);
    CHECK(r.finite);
    CHECK(r.max_relative_error < 1e-4);
  }
}

TEST_CASE("vision training is bitwise reproducible") {
  const auto c = small(ModelKind::Vision);
  std::vector<std::vector<FeatureGrid>> frames;
  for (int i = 0; i < 6; ++i) frames.push_back(grids(3 + i % 2, 100 + static_cast<std::uint64_t>(i)));
  std::vector<Example> data;
  for (int i = 0; i < 6; ++i) data.push_back({{}, &frames[static_cast<std::size_t>(i)], {4 + i % 3, 5, 6}});
  std::vector<std::string> toks = {"<pad>", "<s>", "</s>", "<unk>", "a", "b", "c", "d", "e"};
  const Vocab vocab(toks);
  TrainConfig t;
  t.max_epochs = 3;
  t.batch_size = 4;
  Seq2Seq a(c, 5), b(c, 5);
  fit(a, t, data, {}, vocab, 5, nullptr);
  fit(b, t, data, {}, vocab, 5, nullptr);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) CHECK(a.parameters()[i].value == b.parameters()[i].value);
}

TEST_CASE("unsupported layer choices are rejected") {
  auto c = small(ModelKind::Vision);
  c.vision.kernel = 3;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = small(ModelKind::Text);
  c.net.attention = "additive";
  CHECK_THROWS_AS(c.validate(), DomainError);
}
