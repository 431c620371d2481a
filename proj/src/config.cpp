#include "config.hpp"

#include <fstream>

#include "error.hpp"

namespace actsum {

using nlohmann::json;

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(std::string("config field '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw DomainError(std::string(where) + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw DomainError(std::string(where) + ": unknown field '" + k + "'");
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {
      {"kind", std::string(to_string(c.kind))},
      {"vocab_size", c.vocab_size},
      {"embed_dim", c.net.embed_dim},
      {"hidden_dim", c.net.hidden_dim},
      {"encoder_layers", c.net.encoder_layers},
      {"bidirectional", c.net.bidirectional},
      {"dropout", c.net.dropout},
      {"attention", c.net.attention},
      {"in_channels", c.vision.in_channels},
      {"frame_height", c.vision.frame_height},
      {"frame_width", c.vision.frame_width},
      {"conv1_out", c.vision.conv1_out},
      {"conv2_out", c.vision.conv2_out},
      {"kernel", c.vision.kernel},
  };
}

void merge_json(const json& j, ModelConfig& c) {
  check_keys(j, {"kind", "vocab_size", "embed_dim", "hidden_dim", "encoder_layers", "bidirectional", "dropout",
                 "attention", "in_channels", "frame_height", "frame_width", "conv1_out", "conv2_out", "kernel"},
             "model");
  if (j.contains("kind")) {
    const auto k = parse_model_kind(j.at("kind").get<std::string>());
    if (!k) throw DomainError("model: unknown kind '" + j.at("kind").get<std::string>() + "'");
    c.kind = *k;
  }
  take(j, "vocab_size", c.vocab_size);
  take(j, "embed_dim", c.net.embed_dim);
  take(j, "hidden_dim", c.net.hidden_dim);
  take(j, "encoder_layers", c.net.encoder_layers);
  take(j, "bidirectional", c.net.bidirectional);
  take(j, "dropout", c.net.dropout);
  take(j, "attention", c.net.attention);
  take(j, "in_channels", c.vision.in_channels);
  take(j, "frame_height", c.vision.frame_height);
  take(j, "frame_width", c.vision.frame_width);
  take(j, "conv1_out", c.vision.conv1_out);
  take(j, "conv2_out", c.vision.conv2_out);
  take(j, "kernel", c.vision.kernel);
}

json to_json(const TrainConfig& c) {
  return {
      {"optimizer", c.optimizer},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"patience", c.patience},
      {"clip_norm", c.clip_norm},
      {"seed", c.seed},
      {"teacher_forcing", c.teacher_forcing},
      {"valid_limit", c.valid_limit},
      {"min_freq", c.min_freq},
  };
}

void merge_json(const json& j, TrainConfig& c) {
  check_keys(j, {"optimizer", "learning_rate", "batch_size", "max_epochs", "patience", "clip_norm", "seed",
                 "teacher_forcing", "valid_limit", "min_freq"},
             "train");
  take(j, "optimizer", c.optimizer);
  take(j, "learning_rate", c.learning_rate);
  take(j, "batch_size", c.batch_size);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "clip_norm", c.clip_norm);
  take(j, "seed", c.seed);
  take(j, "teacher_forcing", c.teacher_forcing);
  take(j, "valid_limit", c.valid_limit);
  take(j, "min_freq", c.min_freq);
}

json to_json(const synth::GenConfig& c) {
  json templates = json::array();
  for (auto t : c.lexicon.templates) templates.push_back(std::string(synth::to_string(t)));
  return {
      {"seed", c.seed},
      {"n_train", c.n_train},
      {"n_valid_seen", c.n_valid_seen},
      {"n_valid_unseen", c.n_valid_unseen},
      {"environments_seen", c.environments_seen},
      {"environments_unseen", c.environments_unseen},
      {"templates", templates},
      {"paraphrases_per_task", c.paraphrases_per_task},
      {"annotations_per_episode", c.annotations_per_episode},
      {"feature_profile",
       {{"channels", c.feature_profile.channels},
        {"height", c.feature_profile.height},
        {"width", c.feature_profile.width},
        {"noise_sigma", c.feature_profile.noise_sigma}}},
      {"planted_duplicates", c.planted_duplicates},
  };
}

void merge_json(const json& j, synth::GenConfig& c) {
  check_keys(j, {"seed", "n_train", "n_valid_seen", "n_valid_unseen", "environments_seen", "environments_unseen",
                 "templates", "paraphrases_per_task", "annotations_per_episode", "feature_profile",
                 "planted_duplicates"},
             "corpus");
  take(j, "seed", c.seed);
  take(j, "n_train", c.n_train);
  take(j, "n_valid_seen", c.n_valid_seen);
  take(j, "n_valid_unseen", c.n_valid_unseen);
  take(j, "environments_seen", c.environments_seen);
  take(j, "environments_unseen", c.environments_unseen);
  if (j.contains("templates")) {
    c.lexicon.templates.clear();
    for (const auto& t : j.at("templates")) {
      const auto parsed = synth::parse_template(t.get<std::string>());
      if (!parsed) throw DomainError("corpus: unknown template '" + t.get<std::string>() + "'");
      c.lexicon.templates.push_back(*parsed);
    }
  }
  take(j, "paraphrases_per_task", c.paraphrases_per_task);
  take(j, "annotations_per_episode", c.annotations_per_episode);
  if (j.contains("feature_profile")) {
    const auto& f = j.at("feature_profile");
    check_keys(f, {"channels", "height", "width", "noise_sigma"}, "corpus.feature_profile");
    take(f, "channels", c.feature_profile.channels);
    take(f, "height", c.feature_profile.height);
    take(f, "width", c.feature_profile.width);
    take(f, "noise_sigma", c.feature_profile.noise_sigma);
  }
  take(j, "planted_duplicates", c.planted_duplicates);
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.preset = name;
  c.rows = matrix_task_names();
  if (name == "desk") {
    c.corpus = synth::desk_config();
    c.model.net = TransducerConfig{};
    c.model.vision = VisionConfig{};
    c.train.max_epochs = 15;
    c.train.patience = 3;
    // frame -> low action targets run ~3x longer than plans; still climbing at epoch 15
    c.overrides["img2act"] = {{"train", {{"max_epochs", 40}, {"patience", 8}}}};
  } else if (name == "paper") {
    c.corpus = synth::paper_config();
    c.model.net.embed_dim = 512;
    c.model.net.hidden_dim = 512;
    c.model.vision = VisionConfig{512, 7, 7, 128, 32, 1};
    c.train.max_epochs = 30;
    c.train.patience = 5;
  } else {
    throw DomainError("unknown preset '" + name + "' (expected desk or paper)");
  }
  return c;
}

RunConfig resolve_config(const json& doc) {
  check_keys(doc, {"preset", "corpus", "model", "train", "decode", "render", "matrix"}, "config");
  RunConfig c = preset(doc.value("preset", std::string("desk")));
  if (doc.contains("corpus")) merge_json(doc.at("corpus"), c.corpus);
  if (doc.contains("model")) merge_json(doc.at("model"), c.model);
  if (doc.contains("train")) merge_json(doc.at("train"), c.train);
  if (doc.contains("decode")) {
    check_keys(doc.at("decode"), {"beam"}, "decode");
    take(doc.at("decode"), "beam", c.beam);
  }
  if (doc.contains("render")) {
    check_keys(doc.at("render"), {"collapse_runs"}, "render");
    take(doc.at("render"), "collapse_runs", c.render.collapse_runs);
  }
  if (doc.contains("matrix")) {
    const auto& m = doc.at("matrix");
    check_keys(m, {"rows", "overrides"}, "matrix");
    take(m, "rows", c.rows);
    if (m.contains("overrides")) {
      for (const auto& [task, o] : m.at("overrides").items()) {
        parse_task_name(task);
        check_keys(o, {"model", "train"}, "matrix.overrides");
        c.overrides[task] = o;
      }
    }
  }
  for (const auto& r : c.rows) parse_task_name(r);
  if (c.beam < 1) throw DomainError("decode.beam must be >= 1");
  c.corpus.validate();
  c.train.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DomainError("config " + path.string() + ": " + e.what());
  }
  return resolve_config(doc);
}

json to_json(const RunConfig& c) {
  json overrides = json::object();
  for (const auto& [k, v] : c.overrides) overrides[k] = v;
  auto model = to_json(c.model);
  model.erase("kind");
  model.erase("vocab_size");
  return {{"preset", c.preset},
          {"corpus", to_json(c.corpus)},
          {"model", model},
          {"train", to_json(c.train)},
          {"decode", {{"beam", c.beam}}},
          {"render", {{"collapse_runs", c.render.collapse_runs}}},
          {"matrix", {{"rows", c.rows}, {"overrides", overrides}}}};
}

MatrixConfig matrix_config(const RunConfig& c, const std::filesystem::path& output_dir) {
  MatrixConfig m;
  m.rows = c.rows;
  m.model = c.model;
  m.train = c.train;
  m.overrides = c.overrides;
  m.render = c.render;
  m.beam = c.beam;
  m.output_dir = output_dir;
  return m;
}

}  // namespace actsum
