#include "trace.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "error.hpp"
#include "features.hpp"

namespace actsum {
namespace {

constexpr std::array<std::string_view, 5> kNavigation = {
    "moveahead", "rotateleft", "rotateright", "lookup", "lookdown"};

constexpr std::array<std::string_view, 12> kPlanVerbs = {
    "gotolocation", "pickupobject", "putobject",   "heatobject",
    "coolobject",   "cleanobject",  "sliceobject", "toggleobject",
    "openobject",   "closeobject",  "noop",        "end"};

bool is_identifier(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) != 0;
  });
}

bool is_plan_verb(std::string_view token) {
  return std::find(kPlanVerbs.begin(), kPlanVerbs.end(), token) != kPlanVerbs.end();
}

constexpr std::array<std::pair<TaskType, std::string_view>, 8> kTaskNames = {{
    {TaskType::PickAndPlace, "pick_and_place_simple"},
    {TaskType::PickTwoAndPlace, "pick_two_obj_and_place"},
    {TaskType::HeatAndPlace, "pick_heat_then_place_in_recep"},
    {TaskType::CoolAndPlace, "pick_cool_then_place_in_recep"},
    {TaskType::CleanAndPlace, "pick_clean_then_place_in_recep"},
    {TaskType::SliceAndPlace, "pick_slice_then_place_in_recep"},
    {TaskType::LookAtInLight, "look_at_obj_in_light"},
    {TaskType::PickAndPlaceWithMovableReceptacle, "pick_and_place_with_movable_recep"},
}};

}  // namespace

bool is_navigation_action(std::string_view action_name) {
  const auto lower = to_lower(action_name);
  return std::find(kNavigation.begin(), kNavigation.end(), lower) != kNavigation.end();
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string_view to_string(TaskType type) {
  for (const auto& [t, name] : kTaskNames)
    if (t == type) return name;
  return "unknown";
}

std::optional<TaskType> parse_task_type(std::string_view name) {
  for (const auto& [t, n] : kTaskNames)
    if (n == name) return t;
  return std::nullopt;
}

FeatureGrid::FeatureGrid(FeatureShape shape, std::vector<float> values)
    : shape_(shape), values_(std::move(values)) {
  if (shape_.size() == 0) throw DomainError("feature grid dimensions must be positive");
  if (values_.size() != shape_.size())
    throw DomainError("feature grid holds " + std::to_string(values_.size()) +
                      " values, shape requires " + std::to_string(shape_.size()));
  for (float v : values_)
    if (!std::isfinite(v)) throw DomainError("feature grid contains a non-finite value");
}

std::shared_ptr<const FrameSource> FrameSource::from_file(const std::filesystem::path& path) {
  const auto header = read_feature_header(path);
  std::shared_ptr<FrameSource> src(new FrameSource());
  src->shape_ = header.shape;
  src->count_ = header.frame_count;
  src->path_ = path;
  return src;
}

std::shared_ptr<const FrameSource> FrameSource::in_memory(std::vector<FeatureGrid> frames) {
  std::shared_ptr<FrameSource> src(new FrameSource());
  if (!frames.empty()) src->shape_ = frames.front().shape();
  for (const auto& f : frames)
    if (!(f.shape() == src->shape_)) throw DomainError("frames of one episode must share a shape");
  src->count_ = frames.size();
  src->frames_ = std::move(frames);
  std::call_once(src->loaded_, [] {});
  return src;
}

const std::vector<FeatureGrid>& FrameSource::frames() const {
  std::call_once(loaded_, [this] {
    auto loaded = read_feature_file(path_);
    if (loaded.size() != count_)
      throw LoadError("feature file " + path_.string() + " changed since it was indexed");
    frames_ = std::move(loaded);
  });
  return frames_;
}

std::shared_ptr<const Episode> Episode::create(Episode e) {
  const auto fail = [&](const std::string& what) {
    throw LoadError("episode '" + e.episode_id + "': " + what);
  };
  if (e.episode_id.empty()) throw LoadError("episode_id: empty");
  if (e.high_pddl.empty()) fail("high_pddl: empty");
  for (std::size_t i = 0; i < e.high_pddl.size(); ++i) {
    const auto& s = e.high_pddl[i];
    if (!is_identifier(s.action_name))
      fail("high_pddl[" + std::to_string(i) + "].action: not an identifier");
    for (const auto& a : s.arguments)
      if (!is_identifier(a))
        fail("high_pddl[" + std::to_string(i) + "].args: '" + a + "' is not an identifier");
  }
  if (e.low_actions.empty()) fail("low_actions: empty");
  for (std::size_t i = 0; i < e.low_actions.size(); ++i) {
    const auto& a = e.low_actions[i];
    const auto where = "low_actions[" + std::to_string(i) + "]";
    if (!is_identifier(a.action_name)) fail(where + ".action: not an identifier");
    const bool nav = is_navigation_action(a.action_name);
    if (nav && a.target) fail(where + ": navigation action has a target");
    if (!nav && !a.target) fail(where + ": interaction action without target");
    if (a.target && !is_identifier(*a.target)) fail(where + ".target: not an identifier");
  }
  if (!e.frames) fail("features: missing");
  if (e.frames->count() < e.low_actions.size())
    fail("frames < low_actions (" + std::to_string(e.frames->count()) + " < " +
         std::to_string(e.low_actions.size()) + ")");
  if (e.annotations.empty()) fail("annotations: empty");
  for (std::size_t i = 0; i < e.annotations.size(); ++i) {
    const auto& a = e.annotations[i];
    const auto where = "annotations[" + std::to_string(i) + "]";
    if (a.summary.empty()) fail(where + ": empty summary");
    if (a.instructions.empty()) fail(where + ": empty instructions");
    for (const auto& s : a.instructions)
      if (s.empty()) fail(where + ": empty instruction");
  }
  return std::make_shared<const Episode>(std::move(e));
}

std::vector<std::string> canonicalize_high_pddl(std::span<const HighPddlStep> steps) {
  if (steps.empty()) throw DomainError("canonicalize_high_pddl: empty step list");
  std::vector<std::string> tokens;
  for (const auto& s : steps) {
    if (s.action_name.empty()) throw DomainError("canonicalize_high_pddl: empty action name");
    tokens.push_back(to_lower(s.action_name));
    for (const auto& a : s.arguments) tokens.push_back(to_lower(a));
  }
  return tokens;
}

std::string canonical_high_pddl_text(std::span<const HighPddlStep> steps) {
  return join(canonicalize_high_pddl(steps));
}

std::vector<HighPddlStep> parse_high_pddl(std::span<const std::string> tokens) {
  std::vector<HighPddlStep> steps;
  for (const auto& t : tokens) {
    const auto lower = to_lower(t);
    if (is_plan_verb(lower)) {
      steps.push_back({lower, {}});
    } else {
      if (steps.empty())
        throw DomainError("parse_high_pddl: stream starts with non-verb token '" + t + "'");
      steps.back().arguments.push_back(lower);
    }
  }
  if (steps.empty()) throw DomainError("parse_high_pddl: empty token stream");
  return steps;
}

std::vector<std::string> simplify_low_actions(std::span<const LowAction> actions,
                                              bool collapse_runs) {
  if (actions.empty()) throw DomainError("simplify_low_actions: empty action list");
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < actions.size()) {
    const auto name = to_lower(actions[i].action_name);
    if (collapse_runs && !actions[i].target && is_navigation_action(name)) {
      std::size_t j = i + 1;
      while (j < actions.size() && !actions[j].target &&
             to_lower(actions[j].action_name) == name)
        ++j;
      tokens.push_back(name);
      if (j - i > 1) tokens.push_back("x" + std::to_string(j - i));
      i = j;
      continue;
    }
    tokens.push_back(name);
    if (actions[i].target) tokens.push_back(to_lower(*actions[i].target));
    ++i;
  }
  return tokens;
}

}  // namespace actsum
