#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "model.hpp"
#include "pipeline.hpp"
#include "synthgen.hpp"
#include "train.hpp"

namespace actsum {

nlohmann::json to_json(const ModelConfig& c);
// Fields missing from the document keep the values already in `c`; unknown
// fields are rejected.
void merge_json(const nlohmann::json& j, ModelConfig& c);
nlohmann::json to_json(const TrainConfig& c);
void merge_json(const nlohmann::json& j, TrainConfig& c);
nlohmann::json to_json(const synth::GenConfig& c);
void merge_json(const nlohmann::json& j, synth::GenConfig& c);

// Everything a run needs, resolved from a preset plus a config document.
struct RunConfig {
  std::string preset = "desk";
  synth::GenConfig corpus;
  ModelConfig model;
  TrainConfig train;
  RenderOptions render;
  int beam = 1;
  std::vector<std::string> rows;
  std::map<std::string, nlohmann::json> overrides;
};

// "desk" or "paper"; anything else is a DomainError.
RunConfig preset(const std::string& name);
// Document layout: {"preset", "corpus", "model", "train", "decode", "render",
// "matrix": {"rows", "overrides"}}. The preset is applied first.
RunConfig resolve_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);
MatrixConfig matrix_config(const RunConfig& c, const std::filesystem::path& output_dir);

}  // namespace actsum
