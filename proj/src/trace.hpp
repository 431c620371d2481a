#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace actsum {

// One step of the high level plan, e.g. GotoLocation(alarmclock).
struct HighPddlStep {
  std::string action_name;
  std::vector<std::string> arguments;
};

struct LowAction {
  std::string action_name;
  std::optional<std::string> target;
};

bool is_navigation_action(std::string_view action_name);

struct FeatureShape {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const FeatureShape&) const = default;
};

// Dense channels x height x width grid stored channel-major.
class FeatureGrid {
 public:
  FeatureGrid(FeatureShape shape, std::vector<float> values);

  const FeatureShape& shape() const { return shape_; }
  std::span<const float> values() const { return values_; }

 private:
  FeatureShape shape_;
  std::vector<float> values_;
};

// Frames of one episode. File-backed sources read only the header up front and
// the payload on first access.
class FrameSource {
 public:
  static std::shared_ptr<const FrameSource> from_file(const std::filesystem::path& path);
  static std::shared_ptr<const FrameSource> in_memory(std::vector<FeatureGrid> frames);

  FeatureShape shape() const { return shape_; }
  std::size_t count() const { return count_; }
  const std::filesystem::path& path() const { return path_; }

  // Throws LoadError if a file-backed payload is malformed.
  const std::vector<FeatureGrid>& frames() const;

 private:
  FrameSource() = default;

  FeatureShape shape_;
  std::size_t count_ = 0;
  std::filesystem::path path_;
  mutable std::once_flag loaded_;
  mutable std::vector<FeatureGrid> frames_;
};

struct Annotation {
  std::string summary;
  std::vector<std::string> instructions;
  std::string annotator_id;
};

enum class TaskType {
  PickAndPlace,
  PickTwoAndPlace,
  HeatAndPlace,
  CoolAndPlace,
  CleanAndPlace,
  SliceAndPlace,
  LookAtInLight,
  PickAndPlaceWithMovableReceptacle,
};

std::string_view to_string(TaskType type);
// Accepts both the names produced by to_string and the ALFRED task family names.
std::optional<TaskType> parse_task_type(std::string_view name);

// Structured reference used by the error checker. Only synthetic episodes
// carry it.
struct GoldSlots {
  std::string main_action;
  std::string main_object;
  int object_count = 1;
  // Every place visited; the destination is last.
  std::vector<std::string> places;
  // Every object identifier that takes part in the episode.
  std::vector<std::string> objects;
};

struct Episode {
  std::string episode_id;
  std::string environment_id;
  TaskType task_type = TaskType::PickAndPlace;
  std::vector<HighPddlStep> high_pddl;
  std::vector<LowAction> low_actions;
  std::shared_ptr<const FrameSource> frames;
  std::vector<Annotation> annotations;
  std::optional<GoldSlots> gold_slots;

  // Checks every invariant and returns an immutable handle. Throws LoadError
  // naming the offending field.
  static std::shared_ptr<const Episode> create(Episode fields);
};

using EpisodePtr = std::shared_ptr<const Episode>;

// Flat lowercase rendering: action name then its arguments, steps in order.
std::vector<std::string> canonicalize_high_pddl(std::span<const HighPddlStep> steps);
std::string canonical_high_pddl_text(std::span<const HighPddlStep> steps);

// Inverse of canonicalize_high_pddl for streams whose action names are known
// plan verbs. Throws DomainError otherwise.
std::vector<HighPddlStep> parse_high_pddl(std::span<const std::string> tokens);

std::vector<std::string> simplify_low_actions(std::span<const LowAction> actions,
                                              bool collapse_runs);

std::string to_lower(std::string_view s);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

}  // namespace actsum
