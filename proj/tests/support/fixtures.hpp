#pragma once

#include <string>
#include <vector>

#include "trace.hpp"

namespace actsum::testing {

inline std::shared_ptr<const FrameSource> blank_frames(std::size_t count, FeatureShape shape = {2, 1, 1}) {
  std::vector<FeatureGrid> frames;
  for (std::size_t i = 0; i < count; ++i)
    frames.emplace_back(shape, std::vector<float>(shape.size(), static_cast<float>(i)));
  return FrameSource::in_memory(std::move(frames));
}

// A hand-built pick-and-place episode. Every low action gets one frame unless
// `frames` says otherwise.
inline Episode sample_episode(const std::string& id, const std::string& env, const std::string& object = "mug",
                              const std::string& dest = "desk", int frames = -1) {
  Episode e;
  e.episode_id = id;
  e.environment_id = env;
  e.task_type = TaskType::PickAndPlace;
  e.high_pddl = {{"GotoLocation", {"shelf"}},
                 {"PickupObject", {object}},
                 {"GotoLocation", {dest}},
                 {"PutObject", {object, dest}}};
  e.low_actions = {{"MoveAhead", {}}, {"RotateLeft", {}}, {"PickupObject", object},
                   {"MoveAhead", {}}, {"MoveAhead", {}},  {"PutObject", object}};
  e.frames = blank_frames(frames < 0 ? e.low_actions.size() : static_cast<std::size_t>(frames));
  e.annotations = {{"put a " + object + " on the " + dest, {"go to the shelf.", "take the " + object + "."}, "a1"},
                   {"move the " + object + " to the " + dest, {"walk to the shelf.", "put it down."}, "a2"}};
  return e;
}

}  // namespace actsum::testing
