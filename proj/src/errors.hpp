#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthgen.hpp"
#include "text.hpp"
#include "trace.hpp"

namespace actsum {

struct ErrorLabels {
  bool action_error = false;
  bool object_error = false;
  bool place_error = false;
  bool extra_error = false;

  bool no_errors() const { return !(action_error || object_error || place_error || extra_error); }
  bool operator==(const ErrorLabels&) const = default;
};

// Slot-based check of a generated summary against the episode's gold slots.
// Returns nullopt when the episode has no gold slots (real data).
std::optional<ErrorLabels> classify_errors(std::span<const std::string> summary,
                                           const std::optional<GoldSlots>& gold,
                                           const synth::Lexicon& lexicon);

struct ErrorRow {
  std::string task;
  std::size_t examples = 0;
  std::size_t unavailable = 0;  // examples without gold slots
  double no_errors = 0.0;       // percentages of classified examples
  double action = 0.0;
  double object = 0.0;
  double place = 0.0;
  double extra = 0.0;
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
};

struct ErrorInput {
  std::string task;
  std::vector<std::optional<ErrorLabels>> labels;
};

ErrorReport error_table(std::span<const ErrorInput> rows);
std::string format_error_report(const ErrorReport& report);
std::string error_report_tsv(const ErrorReport& report);

}  // namespace actsum
