#include "synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"
#include "features.hpp"

namespace actsum::synth {
namespace {

constexpr std::array<std::pair<Template, std::string_view>, 6> kTemplateNames = {{
    {Template::PickAndPlace, "pick_and_place"},
    {Template::PickTwoAndPlace, "pick_two_and_place"},
    {Template::HeatAndPlace, "heat_and_place"},
    {Template::CoolAndPlace, "cool_and_place"},
    {Template::CleanAndPlace, "clean_and_place"},
    {Template::SliceAndPlace, "slice_and_place"},
}};

const std::string& pick(const std::vector<Weighted>& options, Rng& rng, std::size_t limit = 0) {
  const std::size_t n = limit ? std::min(limit, options.size()) : options.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += options[i].weight;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < n; ++i) {
    if (u < options[i].weight) return options[i].text;
    u -= options[i].weight;
  }
  return options[n - 1].text;
}

std::string article_for(const std::string& next_word) {
  return !next_word.empty() && std::string_view("aeiou").find(next_word[0]) != std::string_view::npos
             ? "an"
             : "a";
}

// Replaces {key} placeholders; "{a}" becomes the article agreeing with the
// word that follows it.
std::string fill(std::string pattern, const std::map<std::string, std::string>& slots) {
  for (const auto& [k, v] : slots) {
    const std::string key = "{" + k + "}";
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key))
      pattern.replace(pos, key.size(), v);
  }
  for (auto pos = pattern.find("{a}"); pos != std::string::npos; pos = pattern.find("{a}")) {
    auto start = pos + 4;
    const auto end = pattern.find(' ', start);
    pattern.replace(pos, 3, article_for(pattern.substr(start, end - start)));
  }
  return pattern;
}

// Summary sentence frames per template, most frequent first.
std::vector<Weighted> summary_frames(Template t) {
  switch (t) {
    case Template::PickAndPlace:
      return {{"put {a} {obj} {prep} the {dest}", 0.7},
              {"place {a} {obj} {prep} the {dest}", 0.2},
              {"move {a} {obj} to the {dest}", 0.1}};
    case Template::PickTwoAndPlace:
      return {{"put two {objs} {prep} the {dest}", 0.7},
              {"place two {objs} {prep} the {dest}", 0.2},
              {"move two {objs} to the {dest}", 0.1}};
    case Template::HeatAndPlace:
      return {{"put {a} heated {obj} {prep} the {dest}", 0.7},
              {"place {a} heated {obj} {prep} the {dest}", 0.2},
              {"put {a} warm {obj} {prep} the {dest}", 0.1}};
    case Template::CoolAndPlace:
      return {{"put {a} chilled {obj} {prep} the {dest}", 0.7},
              {"place {a} chilled {obj} {prep} the {dest}", 0.2},
              {"put {a} cold {obj} {prep} the {dest}", 0.1}};
    case Template::CleanAndPlace:
      return {{"put {a} clean {obj} {prep} the {dest}", 0.7},
              {"place {a} clean {obj} {prep} the {dest}", 0.2},
              {"put {a} rinsed {obj} {prep} the {dest}", 0.1}};
    case Template::SliceAndPlace:
      return {{"put {a} sliced {obj} {prep} the {dest}", 0.7},
              {"place {a} sliced {obj} {prep} the {dest}", 0.2},
              {"put {a} chopped {obj} {prep} the {dest}", 0.1}};
  }
  return {};
}

std::string appliance_of(Template t) {
  switch (t) {
    case Template::HeatAndPlace: return "microwave";
    case Template::CoolAndPlace: return "fridge";
    case Template::CleanAndPlace: return "sinkbasin";
    default: return "";
  }
}

bool eligible(const ObjectEntry& o, Template t) {
  switch (t) {
    case Template::HeatAndPlace: return o.heatable;
    case Template::CoolAndPlace: return o.coolable;
    case Template::CleanAndPlace: return o.cleanable;
    case Template::SliceAndPlace: return o.sliceable;
    default: return true;
  }
}

struct WorldState {
  std::string place = "start";
  std::map<std::string, std::string> object_place;  // instance -> place
  std::string held;
};

// Per-environment navigation route between two places: 2-8 tokens.
std::vector<std::string> route(std::uint64_t seed, const std::string& env, const std::string& from,
                               const std::string& to) {
  Rng r(mix_seed(seed, hash_string("route:" + env + ":" + from + ":" + to)));
  const int n = r.integer(2, 8);
  static const std::vector<Weighted> kNav = {{"MoveAhead", 0.6},
                                             {"RotateLeft", 0.15},
                                             {"RotateRight", 0.15},
                                             {"LookDown", 0.05},
                                             {"LookUp", 0.05}};
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(pick(kNav, r));
  return out;
}

std::string object_word(const ObjectEntry& o) { return o.singular; }

}  // namespace

std::string_view to_string(Template t) {
  for (const auto& [tt, n] : kTemplateNames)
    if (tt == t) return n;
  return "unknown";
}

std::optional<Template> parse_template(std::string_view name) {
  for (const auto& [t, n] : kTemplateNames)
    if (n == name) return t;
  return std::nullopt;
}

TaskType task_type_of(Template t) {
  switch (t) {
    case Template::PickAndPlace: return TaskType::PickAndPlace;
    case Template::PickTwoAndPlace: return TaskType::PickTwoAndPlace;
    case Template::HeatAndPlace: return TaskType::HeatAndPlace;
    case Template::CoolAndPlace: return TaskType::CoolAndPlace;
    case Template::CleanAndPlace: return TaskType::CleanAndPlace;
    case Template::SliceAndPlace: return TaskType::SliceAndPlace;
  }
  return TaskType::PickAndPlace;
}

std::string_view main_action_of(Template t) {
  switch (t) {
    case Template::PickAndPlace:
    case Template::PickTwoAndPlace: return "place";
    case Template::HeatAndPlace: return "heat";
    case Template::CoolAndPlace: return "cool";
    case Template::CleanAndPlace: return "clean";
    case Template::SliceAndPlace: return "slice";
  }
  return "place";
}

Lexicon Lexicon::standard() {
  Lexicon lx;
  //            id              singular     plural       heat   cool   clean  slice
  lx.objects = {{"apple", "apple", "apples", true, true, false, true},
                {"tomato", "tomato", "tomatoes", true, true, false, true},
                {"potato", "potato", "potatoes", true, true, false, true},
                {"bread", "bread", "breads", true, true, false, true},
                {"lettuce", "lettuce", "lettuces", false, true, false, true},
                {"egg", "egg", "eggs", true, true, false, false},
                {"mug", "mug", "mugs", true, true, true, false},
                {"cup", "cup", "cups", true, true, true, false},
                {"plate", "plate", "plates", false, true, true, false},
                {"bowl", "bowl", "bowls", false, true, true, false},
                {"pan", "pan", "pans", false, false, true, false},
                {"spoon", "spoon", "spoons", false, false, true, false},
                {"fork", "fork", "forks", false, false, true, false},
                {"book", "book", "books", false, false, false, false},
                {"pencil", "pencil", "pencils", false, false, false, false},
                {"cellphone", "phone", "phones", false, false, false, false},
                {"alarmclock", "clock", "clocks", false, false, false, false},
                {"remotecontrol", "remote", "remotes", false, false, false, false},
                {"pillow", "pillow", "pillows", false, false, false, false},
                {"vase", "vase", "vases", false, false, false, false},
                {"candle", "candle", "candles", false, false, false, false},
                {"sponge", "sponge", "sponges", false, false, true, false}};
  lx.places = {{"countertop", {{"counter", 0.85}, {"countertop", 0.15}}, "on", true},
               {"diningtable", {{"table", 1.0}}, "on", true},
               {"desk", {{"desk", 1.0}}, "on", true},
               {"shelf", {{"shelf", 1.0}}, "on", true},
               {"cabinet", {{"cabinet", 0.8}, {"cupboard", 0.2}}, "in", true},
               {"drawer", {{"drawer", 1.0}}, "in", true},
               {"dresser", {{"dresser", 1.0}}, "on", true},
               {"sofa", {{"sofa", 0.8}, {"couch", 0.2}}, "on", true},
               {"bed", {{"bed", 1.0}}, "on", true},
               {"armchair", {{"armchair", 0.8}, {"chair", 0.2}}, "on", true},
               {"sidetable", {{"nightstand", 1.0}}, "on", true},
               {"garbagecan", {{"bin", 0.7}, {"trash", 0.3}}, "in", true},
               {"microwave", {{"microwave", 1.0}}, "in", false},
               {"fridge", {{"fridge", 0.8}, {"refrigerator", 0.2}}, "in", false},
               {"sinkbasin", {{"sink", 1.0}}, "in", false}};
  lx.templates = {Template::PickAndPlace,  Template::PickTwoAndPlace, Template::HeatAndPlace,
                  Template::CoolAndPlace,  Template::CleanAndPlace,   Template::SliceAndPlace};
  lx.action_forms = {
      {"place", {"put", "place", "placed", "move", "moved", "set"}},
      {"heat", {"heat", "heated", "warm", "warmed", "hot", "microwaved"}},
      {"cool", {"cool", "cooled", "chilled", "chill", "cold"}},
      {"clean", {"clean", "cleaned", "rinsed", "rinse", "washed", "wash"}},
      {"slice", {"slice", "sliced", "chopped", "cut"}},
  };
  return lx;
}

const ObjectEntry* Lexicon::object(std::string_view id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

const PlaceEntry* Lexicon::place(std::string_view id) const {
  for (const auto& p : places)
    if (p.id == id) return &p;
  return nullptr;
}

const std::vector<std::string>* Lexicon::forms(std::string_view action) const {
  for (const auto& [a, f] : action_forms)
    if (a == action) return &f;
  return nullptr;
}

void GenConfig::validate() const {
  if (n_train <= 0 || n_valid_seen <= 0 || n_valid_unseen <= 0)
    throw DomainError("gen config: split sizes must be positive");
  if (environments_seen.empty() || environments_unseen.empty())
    throw DomainError("gen config: environment lists must be non-empty");
  for (const auto& e : environments_seen)
    if (std::find(environments_unseen.begin(), environments_unseen.end(), e) !=
        environments_unseen.end())
      throw DomainError("gen config: environment '" + e + "' is both seen and unseen");
  if (paraphrases_per_task < 1 || paraphrases_per_task > 3)
    throw DomainError("gen config: paraphrases_per_task must be in [1, 3]");
  if (annotations_per_episode < 1) throw DomainError("gen config: annotations_per_episode must be positive");
  if (feature_profile.shape().size() == 0) throw DomainError("gen config: feature dims must be positive");
  if (!(feature_profile.noise_sigma >= 0.0)) throw DomainError("gen config: noise_sigma must be >= 0");
  if (planted_duplicates < 0 || planted_duplicates > n_valid_seen + n_valid_unseen)
    throw DomainError("gen config: planted_duplicates out of range");
  if (lexicon.templates.empty()) throw DomainError("gen config: no templates");
  for (auto t : lexicon.templates) {
    if (std::none_of(lexicon.objects.begin(), lexicon.objects.end(),
                     [&](const ObjectEntry& o) { return eligible(o, t); }))
      throw DomainError("gen config: no object fits template " + std::string(to_string(t)));
    const auto app = appliance_of(t);
    if (!app.empty() && !lexicon.place(app))
      throw DomainError("gen config: template " + std::string(to_string(t)) + " needs place " + app);
    if (t == Template::SliceAndPlace && lexicon.object(lexicon.tool_object))
      throw DomainError("gen config: tool object must not double as a main object");
  }
  if (std::count_if(lexicon.places.begin(), lexicon.places.end(),
                    [](const PlaceEntry& p) { return p.holds_objects; }) < 2)
    throw DomainError("gen config: need at least two receptacle places");
}

GenConfig desk_config() {
  GenConfig c;
  for (int i = 0; i < 12; ++i) c.environments_seen.push_back("env_s" + std::to_string(i / 10) + std::to_string(i % 10));
  for (int i = 0; i < 4; ++i) c.environments_unseen.push_back("env_u" + std::to_string(i / 10) + std::to_string(i % 10));
  return c;
}

GenConfig paper_config() {
  GenConfig c = desk_config();
  c.feature_profile = {512, 7, 7, 0.1};
  return c;
}

Recipe sample_recipe(const GenConfig& config, Template templ, Rng& rng) {
  const auto& lx = config.lexicon;
  std::vector<const ObjectEntry*> objs;
  for (const auto& o : lx.objects)
    if (eligible(o, templ)) objs.push_back(&o);
  std::vector<const PlaceEntry*> holders;
  for (const auto& p : lx.places)
    if (p.holds_objects) holders.push_back(&p);

  Recipe r;
  r.templ = templ;
  r.object = objs[rng.index(objs.size())]->id;
  const auto any_place = [&] { return holders[rng.index(holders.size())]->id; };
  const int pickups = templ == Template::PickTwoAndPlace || templ == Template::SliceAndPlace ? 2 : 1;
  for (int i = 0; i < pickups; ++i) r.sources.push_back(any_place());
  do {
    r.destination = any_place();
  } while (std::find(r.sources.begin(), r.sources.end(), r.destination) != r.sources.end());
  return r;
}

std::vector<float> basis_grid(const std::string& symbol, const FeatureProfile& profile,
                              std::uint64_t basis_seed) {
  Rng r(mix_seed(basis_seed, hash_string("basis:" + symbol)));
  std::vector<float> g(profile.shape().size());
  for (auto& v : g) v = static_cast<float>(r.normal());
  return g;
}

std::vector<FeatureGrid> render_features(const std::vector<FrameState>& states,
                                         const FeatureProfile& profile, std::uint64_t basis_seed,
                                         Rng& noise_rng) {
  if (profile.shape().size() == 0) throw DomainError("feature profile dims must be positive");
  std::map<std::string, std::vector<float>> cache;
  std::vector<FeatureGrid> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    std::vector<double> acc(profile.shape().size(), 0.0);
    for (const auto& sym : s.symbols) {
      auto it = cache.find(sym);
      if (it == cache.end()) it = cache.emplace(sym, basis_grid(sym, profile, basis_seed)).first;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += it->second[i];
    }
    std::vector<float> values(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
      double v = acc[i];
      if (profile.noise_sigma > 0.0) v += profile.noise_sigma * noise_rng.normal();
      values[i] = static_cast<float>(v);
    }
    out.emplace_back(profile.shape(), std::move(values));
  }
  return out;
}

Episode instantiate_episode(const GenConfig& config, const std::string& episode_id,
                            const std::string& env, const Recipe& recipe, Rng& rng) {
  const auto& lx = config.lexicon;
  const auto* obj = lx.object(recipe.object);
  const auto* dest = lx.place(recipe.destination);
  if (!obj || !dest) throw DomainError("recipe refers to an unknown object or place");
  const std::string tool = lx.tool_object;
  const std::string appliance = appliance_of(recipe.templ);

  Episode e;
  e.episode_id = episode_id;
  e.environment_id = env;
  e.task_type = task_type_of(recipe.templ);

  // High level plan.
  auto& plan = e.high_pddl;
  const auto go = [&](const std::string& p) { plan.push_back({"GotoLocation", {p}}); };
  switch (recipe.templ) {
    case Template::PickAndPlace:
    case Template::PickTwoAndPlace:
      for (const auto& src : recipe.sources) {
        go(src);
        plan.push_back({"PickupObject", {obj->id}});
        go(dest->id);
        plan.push_back({"PutObject", {obj->id, dest->id}});
      }
      break;
    case Template::HeatAndPlace:
    case Template::CoolAndPlace:
    case Template::CleanAndPlace: {
      go(recipe.sources[0]);
      plan.push_back({"PickupObject", {obj->id}});
      go(appliance);
      const char* verb = recipe.templ == Template::HeatAndPlace   ? "HeatObject"
                         : recipe.templ == Template::CoolAndPlace ? "CoolObject"
                                                                  : "CleanObject";
      plan.push_back({verb, {obj->id}});
      go(dest->id);
      plan.push_back({"PutObject", {obj->id, dest->id}});
      break;
    }
    case Template::SliceAndPlace:
      go(recipe.sources[0]);
      plan.push_back({"PickupObject", {tool}});
      go(recipe.sources[1]);
      plan.push_back({"SliceObject", {obj->id}});
      plan.push_back({"PutObject", {tool, recipe.sources[1]}});
      plan.push_back({"PickupObject", {obj->id}});
      go(dest->id);
      plan.push_back({"PutObject", {obj->id, dest->id}});
      break;
  }

  // World state: instance name -> place. Pick-two uses two instances of the
  // same object type, slice uses the tool.
  WorldState world;
  std::vector<std::string> instances;
  if (recipe.templ == Template::PickTwoAndPlace) {
    world.object_place[obj->id + "#0"] = recipe.sources[0];
    world.object_place[obj->id + "#1"] = recipe.sources[1];
  } else if (recipe.templ == Template::SliceAndPlace) {
    world.object_place[tool + "#0"] = recipe.sources[0];
    world.object_place[obj->id + "#0"] = recipe.sources[1];
  } else {
    world.object_place[obj->id + "#0"] = recipe.sources[0];
  }
  const auto type_of = [](const std::string& inst) { return inst.substr(0, inst.find('#')); };

  std::vector<FrameState> states;
  const auto snapshot = [&](const std::string& action) {
    FrameState s;
    s.symbols.push_back("env:" + env);
    s.symbols.push_back("place:" + world.place);
    std::set<std::string> visible;
    for (const auto& [inst, p] : world.object_place)
      if (p == world.place) visible.insert(type_of(inst));
    if (!world.held.empty()) visible.insert(type_of(world.held));
    for (const auto& v : visible) s.symbols.push_back("obj:" + v);
    s.symbols.push_back("act:" + to_lower(action));
    states.push_back(std::move(s));
  };
  const auto low = [&](const std::string& name, std::optional<std::string> target) {
    e.low_actions.push_back({name, std::move(target)});
  };
  const auto pickup = [&](const std::string& type) {
    for (auto& [inst, p] : world.object_place)
      if (p == world.place && type_of(inst) == type) {
        world.held = inst;
        world.object_place.erase(inst);
        break;
      }
    low("PickupObject", type);
    snapshot("PickupObject");
  };
  const auto put = [&](const std::string& receptacle) {
    if (!world.held.empty()) world.object_place[world.held] = world.place;
    world.held.clear();
    low("PutObject", receptacle);
    snapshot("PutObject");
  };
  const auto interact = [&](const std::string& name, const std::string& target) {
    low(name, target);
    snapshot(name);
  };

  for (const auto& step : plan) {
    const auto& a = step.action_name;
    if (a == "GotoLocation") {
      const auto& to = step.arguments[0];
      const auto path = route(config.seed, env, world.place, to);
      world.place = to;
      for (const auto& nav : path) {
        low(nav, std::nullopt);
        snapshot(nav);
      }
    } else if (a == "PickupObject") {
      pickup(step.arguments[0]);
    } else if (a == "PutObject") {
      put(step.arguments[1]);
    } else if (a == "HeatObject") {
      interact("OpenObject", "microwave");
      put("microwave");
      interact("CloseObject", "microwave");
      interact("ToggleObject", "microwave");
      interact("OpenObject", "microwave");
      pickup(step.arguments[0]);
      interact("CloseObject", "microwave");
    } else if (a == "CoolObject") {
      interact("OpenObject", "fridge");
      put("fridge");
      interact("CloseObject", "fridge");
      interact("OpenObject", "fridge");
      pickup(step.arguments[0]);
      interact("CloseObject", "fridge");
    } else if (a == "CleanObject") {
      put("sinkbasin");
      interact("ToggleObject", "faucet");
      interact("ToggleObject", "faucet");
      pickup(step.arguments[0]);
    } else if (a == "SliceObject") {
      interact("SliceObject", step.arguments[0]);
    }
  }

  Rng noise(rng.next_u64());
  e.frames = FrameSource::in_memory(render_features(states, config.feature_profile, config.seed, noise));

  // Language.
  const auto surface = [&](const std::string& place_id) {
    const auto* p = lx.place(place_id);
    return p ? pick(p->surfaces, rng) : place_id;
  };
  const auto prep = [&](const std::string& place_id) {
    const auto* p = lx.place(place_id);
    return p ? p->preposition : std::string("on");
  };
  const auto frames = summary_frames(recipe.templ);
  for (int k = 0; k < config.annotations_per_episode; ++k) {
    Annotation ann;
    ann.annotator_id = "ann" + std::to_string(k);
    ann.summary = fill(pick(frames, rng, static_cast<std::size_t>(config.paraphrases_per_task)),
                       {{"obj", object_word(*obj)},
                        {"objs", obj->plural},
                        {"prep", prep(dest->id)},
                        {"dest", surface(dest->id)}});
    std::string here;
    for (const auto& step : plan) {
      const auto& a = step.action_name;
      const auto name_of = [&](const std::string& id) {
        const auto* o = lx.object(id);
        return o ? o->singular : id;
      };
      std::string sentence;
      if (a == "GotoLocation") {
        here = step.arguments[0];
        sentence = fill(pick({{"walk to the {p}", 0.5}, {"go to the {p}", 0.3},
                              {"turn around and walk to the {p}", 0.2}}, rng),
                        {{"p", surface(here)}});
      } else if (a == "PickupObject") {
        sentence = fill(pick({{"pick up the {o}", 0.6}, {"grab the {o} from the {p}", 0.4}}, rng),
                        {{"o", name_of(step.arguments[0])}, {"p", surface(here)}});
      } else if (a == "PutObject") {
        sentence = fill(pick({{"put the {o} {prep} the {p}", 0.6}, {"place the {o} {prep} the {p}", 0.4}}, rng),
                        {{"o", name_of(step.arguments[0])},
                         {"prep", prep(step.arguments[1])},
                         {"p", surface(step.arguments[1])}});
      } else if (a == "HeatObject") {
        sentence = fill(pick({{"heat the {o} in the microwave", 0.6}, {"warm the {o} in the microwave", 0.4}}, rng),
                        {{"o", name_of(step.arguments[0])}});
      } else if (a == "CoolObject") {
        sentence = fill(pick({{"chill the {o} in the fridge", 0.6}, {"cool the {o} in the fridge", 0.4}}, rng),
                        {{"o", name_of(step.arguments[0])}});
      } else if (a == "CleanObject") {
        sentence = fill(pick({{"rinse the {o} in the sink", 0.6}, {"wash the {o} in the sink", 0.4}}, rng),
                        {{"o", name_of(step.arguments[0])}});
      } else if (a == "SliceObject") {
        sentence = fill(pick({{"slice the {o}", 0.6}, {"cut the {o} with the knife", 0.4}}, rng),
                        {{"o", name_of(step.arguments[0])}});
      }
      ann.instructions.push_back(sentence);
    }
    e.annotations.push_back(std::move(ann));
  }

  GoldSlots g;
  g.main_action = std::string(main_action_of(recipe.templ));
  g.main_object = obj->id;
  g.object_count = recipe.templ == Template::PickTwoAndPlace ? 2 : 1;
  for (const auto& s : recipe.sources)
    if (std::find(g.places.begin(), g.places.end(), s) == g.places.end()) g.places.push_back(s);
  if (!appliance.empty()) g.places.push_back(appliance);
  g.places.erase(std::remove(g.places.begin(), g.places.end(), dest->id), g.places.end());
  g.places.push_back(dest->id);
  g.objects.push_back(obj->id);
  if (recipe.templ == Template::SliceAndPlace) g.objects.push_back(tool);
  e.gold_slots = std::move(g);
  return e;
}

EpisodePtr generate_episode(const GenConfig& config, const std::string& episode_id,
                            const std::string& env, Template templ, Rng& rng) {
  const auto recipe = sample_recipe(config, templ, rng);
  return Episode::create(instantiate_episode(config, episode_id, env, recipe, rng));
}

namespace {

std::string padded(int i) {
  std::string s = std::to_string(i);
  return std::string(s.size() < 6 ? 6 - s.size() : 0, '0') + s;
}

// Produces every episode in order (train, valid_seen, valid_unseen). Each
// episode draws from its own stream keyed by (seed, split, index, attempt).
void for_each_episode(const GenConfig& config, CorpusInfo& info,
                      const std::function<void(Split, EpisodePtr)>& sink) {
  config.validate();
  const auto stream = [&](Split s, int index, int attempt) {
    return Rng(mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(s) + 1),
                        (static_cast<std::uint64_t>(index) << 16) + static_cast<std::uint64_t>(attempt)));
  };
  const auto& templates = config.lexicon.templates;

  std::vector<Recipe> train_recipes;
  std::unordered_set<std::string> train_keys;
  for (int i = 0; i < config.n_train; ++i) {
    auto rng = stream(Split::Train, i, 0);
    const auto& env = config.environments_seen[static_cast<std::size_t>(i) % config.environments_seen.size()];
    const auto templ = templates[rng.index(templates.size())];
    auto recipe = sample_recipe(config, templ, rng);
    auto ep = Episode::create(instantiate_episode(config, "train_" + padded(i), env, recipe, rng));
    train_keys.insert(canonical_high_pddl_text(ep->high_pddl));
    train_recipes.push_back(std::move(recipe));
    sink(Split::Train, std::move(ep));
  }

  // Planted duplicates alternate seen/unseen and take the last indices.
  std::set<std::pair<int, int>> planted;
  for (int k = 0; k < config.planted_duplicates; ++k) {
    const int split = k % 2;
    const int n = split == 0 ? config.n_valid_seen : config.n_valid_unseen;
    int idx = n - 1 - k / 2;
    if (idx < 0) idx = (split == 0 ? config.n_valid_unseen : config.n_valid_seen) - 1 - k / 2;
    planted.emplace(split, idx);
  }

  const std::size_t seen_pool =
      std::min(config.environments_seen.size(), static_cast<std::size_t>(config.n_train));
  for (int split = 0; split < 2; ++split) {
    const Split s = split == 0 ? Split::ValidSeen : Split::ValidUnseen;
    const int n = split == 0 ? config.n_valid_seen : config.n_valid_unseen;
    for (int i = 0; i < n; ++i) {
      const auto& env = split == 0 ? config.environments_seen[static_cast<std::size_t>(i) % seen_pool]
                                   : config.environments_unseen[static_cast<std::size_t>(i) %
                                                                config.environments_unseen.size()];
      const auto id = std::string(to_string(s)) + "_" + padded(i);
      if (planted.count({split, i})) {
        auto rng = stream(s, i, 0);
        const auto& recipe = train_recipes[rng.index(train_recipes.size())];
        auto ep = Episode::create(instantiate_episode(config, id, env, recipe, rng));
        info.planted_episode_ids.push_back(id);
        info.planted_annotations += ep->annotations.size();
        sink(s, std::move(ep));
        continue;
      }
      for (int attempt = 0;; ++attempt) {
        auto rng = stream(s, i, attempt);
        const auto templ = templates[rng.index(templates.size())];
        const auto recipe = sample_recipe(config, templ, rng);
        auto ep = Episode::create(instantiate_episode(config, id, env, recipe, rng));
        if (train_keys.count(canonical_high_pddl_text(ep->high_pddl))) {
          if (attempt > 10000)
            throw DomainError("gen config: cannot find a plan outside the training set");
          continue;
        }
        sink(s, std::move(ep));
        break;
      }
    }
  }
}

}  // namespace

SplitSet generate_splits(const GenConfig& config, CorpusInfo* info) {
  SplitSet splits;
  CorpusInfo local;
  for_each_episode(config, local, [&](Split s, EpisodePtr e) { splits.get(s).push_back(std::move(e)); });
  if (info) *info = std::move(local);
  check_split_invariants(splits);
  return splits;
}

CorpusInfo generate_corpus(const GenConfig& config, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  for (auto s : {Split::Train, Split::ValidSeen, Split::ValidUnseen}) {
    std::error_code ec;
    fs::create_directories(out_dir / std::string(to_string(s)), ec);
    if (ec) throw IoError("cannot create " + (out_dir / std::string(to_string(s))).string() + ": " + ec.message());
  }
  CorpusInfo info;
  for_each_episode(config, info, [&](Split s, EpisodePtr e) {
    const auto dir = out_dir / std::string(to_string(s));
    const auto features = e->episode_id + ".feat";
    write_feature_file(dir / features, e->frames->frames());
    write_trajectory(*e, dir / (e->episode_id + ".json"), features);
  });
  nlohmann::json meta = {{"seed", config.seed},
                         {"n_train", config.n_train},
                         {"n_valid_seen", config.n_valid_seen},
                         {"n_valid_unseen", config.n_valid_unseen},
                         {"planted_episode_ids", info.planted_episode_ids},
                         {"planted_annotations", info.planted_annotations}};
  std::ofstream out(out_dir / "generation.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (out_dir / "generation.json").string());
  out << meta.dump(1) << '\n';
  return info;
}

}  // namespace actsum::synth
