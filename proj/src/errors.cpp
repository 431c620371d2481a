#include "errors.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "error.hpp"

namespace actsum {

namespace {

bool contains(const std::set<std::string>& tokens, std::string_view word) {
  return tokens.find(std::string(word)) != tokens.end();
}

}  // namespace

std::optional<ErrorLabels> classify_errors(std::span<const std::string> summary, const std::optional<GoldSlots>& gold,
                                           const synth::Lexicon& lexicon) {
  if (!gold) return std::nullopt;
  const std::set<std::string> tokens(summary.begin(), summary.end());
  ErrorLabels out;

  // Action: the gold action must surface and no other specific action may.
  // Placement verbs carry every summary, so they only count when placement
  // itself is the main action.
  bool gold_seen = false;
  for (const auto& [action, forms] : lexicon.action_forms) {
    bool seen = false;
    for (const auto& f : forms) seen = seen || contains(tokens, f);
    if (action == gold->main_action) {
      gold_seen = seen;
    } else if (seen && action != "place") {
      out.action_error = true;
    }
  }
  if (!gold_seen) out.action_error = true;

  // Object and count.
  if (const auto* obj = lexicon.object(gold->main_object)) {
    if (!contains(tokens, obj->singular) && !contains(tokens, obj->plural) && !contains(tokens, obj->id))
      out.object_error = true;
  } else {
    out.object_error = true;
  }
  const bool says_two = contains(tokens, "two");
  if (says_two != (gold->object_count == 2)) out.object_error = true;

  // Places: every mentioned place must belong to the episode and the
  // destination has to be named.
  const auto place_named = [&](const synth::PlaceEntry& p) {
    for (const auto& s : p.surfaces)
      if (contains(tokens, s.text)) return true;
    return false;
  };
  for (const auto& p : lexicon.places) {
    if (!place_named(p)) continue;
    if (std::find(gold->places.begin(), gold->places.end(), p.id) == gold->places.end()) out.place_error = true;
  }
  if (gold->places.empty()) {
    out.place_error = true;
  } else if (const auto* dest = lexicon.place(gold->places.back()); !dest || !place_named(*dest)) {
    out.place_error = true;
  }

  // Extra: objects that never take part in the episode.
  const auto in_episode = [&](const std::string& id) {
    return std::find(gold->objects.begin(), gold->objects.end(), id) != gold->objects.end();
  };
  for (const auto& o : lexicon.objects) {
    if (in_episode(o.id)) continue;
    if (contains(tokens, o.singular) || contains(tokens, o.plural)) out.extra_error = true;
  }
  if (!in_episode(lexicon.tool_object) && contains(tokens, lexicon.tool_object)) out.extra_error = true;
  return out;
}

ErrorReport error_table(std::span<const ErrorInput> rows) {
  ErrorReport report;
  for (const auto& in : rows) {
    if (in.labels.empty()) throw DomainError("error_table: task '" + in.task + "' has no labels");
    ErrorRow row;
    row.task = in.task;
    row.examples = in.labels.size();
    std::size_t n = 0, clean = 0, action = 0, object = 0, place = 0, extra = 0;
    for (const auto& l : in.labels) {
      if (!l) {
        ++row.unavailable;
        continue;
      }
      ++n;
      clean += l->no_errors();
      action += l->action_error;
      object += l->object_error;
      place += l->place_error;
      extra += l->extra_error;
    }
    if (n > 0) {
      const auto pct = [n](std::size_t k) { return 100.0 * static_cast<double>(k) / static_cast<double>(n); };
      row.no_errors = pct(clean);
      row.action = pct(action);
      row.object = pct(object);
      row.place = pct(place);
      row.extra = pct(extra);
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string format_error_report(const ErrorReport& report) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %9s %7s %7s %7s %7s %6s\n", "task", "no errors", "action", "object", "place",
                "extra", "n");
  out << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %9.1f %7.1f %7.1f %7.1f %7.1f %6zu\n", r.task.c_str(), r.no_errors, r.action,
                  r.object, r.place, r.extra, r.examples - r.unavailable);
    out << buf;
    if (r.unavailable)
      out << "  (" << r.unavailable << " examples without gold slots were not classified)\n";
  }
  return out.str();
}

std::string error_report_tsv(const ErrorReport& report) {
  std::ostringstream out;
  out << "task\tno_errors\taction\tobject\tplace\textra\tclassified\tunavailable\n";
  char buf[64];
  for (const auto& r : report.rows) {
    out << r.task;
    for (double v : {r.no_errors, r.action, r.object, r.place, r.extra}) {
      std::snprintf(buf, sizeof buf, "\t%.4f", v);
      out << buf;
    }
    out << '\t' << (r.examples - r.unavailable) << '\t' << r.unavailable << '\n';
  }
  return out.str();
}

}  // namespace actsum
