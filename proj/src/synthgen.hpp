#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "rng.hpp"
#include "trace.hpp"

namespace actsum::synth {

struct Weighted {
  std::string text;
  double weight = 1.0;
};

struct ObjectEntry {
  std::string id;
  std::string singular;
  std::string plural;
  bool heatable = false;
  bool coolable = false;
  bool cleanable = false;
  bool sliceable = false;
};

struct PlaceEntry {
  std::string id;
  std::vector<Weighted> surfaces;
  std::string preposition;  // "on" or "in"
  bool holds_objects = true;  // usable as a source or destination
};

enum class Template { PickAndPlace, PickTwoAndPlace, HeatAndPlace, CoolAndPlace, CleanAndPlace, SliceAndPlace };

std::string_view to_string(Template t);
std::optional<Template> parse_template(std::string_view name);
TaskType task_type_of(Template t);
// Gold main action label: "place", "heat", "cool", "clean" or "slice".
std::string_view main_action_of(Template t);

// Surface-form tables shared by the generator and the error checker.
struct Lexicon {
  std::vector<ObjectEntry> objects;
  std::vector<PlaceEntry> places;
  std::vector<Template> templates;
  // main action label -> words that report it
  std::vector<std::pair<std::string, std::vector<std::string>>> action_forms;
  std::string tool_object = "knife";

  static Lexicon standard();

  const ObjectEntry* object(std::string_view id) const;
  const PlaceEntry* place(std::string_view id) const;
  const std::vector<std::string>* forms(std::string_view action) const;
};

struct FeatureProfile {
  std::uint32_t channels = 64;
  std::uint32_t height = 4;
  std::uint32_t width = 4;
  double noise_sigma = 0.1;

  FeatureShape shape() const { return {channels, height, width}; }
};

struct GenConfig {
  std::uint64_t seed = 0;
  int n_train = 2000;
  int n_valid_seen = 200;
  int n_valid_unseen = 200;
  std::vector<std::string> environments_seen;
  std::vector<std::string> environments_unseen;
  Lexicon lexicon = Lexicon::standard();
  int paraphrases_per_task = 3;
  int annotations_per_episode = 3;
  FeatureProfile feature_profile;
  int planted_duplicates = 0;

  // Throws DomainError on a malformed config.
  void validate() const;
};

GenConfig desk_config();
GenConfig paper_config();

// Slot bindings for one templated episode.
struct Recipe {
  Template templ = Template::PickAndPlace;
  std::string object;
  std::vector<std::string> sources;  // one per pickup (two for pick-two; knife then object for slice)
  std::string destination;
};

Recipe sample_recipe(const GenConfig& config, Template templ, Rng& rng);

struct FrameState {
  std::vector<std::string> symbols;  // e.g. "env:env_s00", "place:desk", "obj:apple", "act:moveahead"
};

// Sum of per-symbol basis grids plus N(0, noise_sigma) noise. The basis for
// a symbol depends only on (basis_seed, symbol).
std::vector<FeatureGrid> render_features(const std::vector<FrameState>& states,
                                         const FeatureProfile& profile, std::uint64_t basis_seed,
                                         Rng& noise_rng);
std::vector<float> basis_grid(const std::string& symbol, const FeatureProfile& profile,
                              std::uint64_t basis_seed);

Episode instantiate_episode(const GenConfig& config, const std::string& episode_id,
                            const std::string& env, const Recipe& recipe, Rng& rng);

EpisodePtr generate_episode(const GenConfig& config, const std::string& episode_id,
                            const std::string& env, Template templ, Rng& rng);

struct CorpusInfo {
  std::vector<std::string> planted_episode_ids;
  std::size_t planted_annotations = 0;
};

// Builds the whole corpus in memory.
SplitSet generate_splits(const GenConfig& config, CorpusInfo* info = nullptr);

// Writes the split manifest layout read by load_splits, plus generation.json.
CorpusInfo generate_corpus(const GenConfig& config, const std::filesystem::path& out_dir);

}  // namespace actsum::synth
