#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vitppg {

// Per-target mean absolute error in the target's own unit.
struct EvalReport {
  std::map<std::string, double> mae;
  std::size_t count = 0;
  std::string fingerprint;
};

enum class ReportLayout { bp_slash, task_rows };

ReportLayout parse_report_layout(std::string_view name);

// One evaluated (row, column) cell source. Several entries may share a cell,
// e.g. separate dbp and sbp runs for the same dataset and model.
struct ReportEntry {
  std::string row;
  std::string column;
  EvalReport report;
};

// Unit for a known target (mmHg, BPM, BRPM, %, MEQ/L, MMOL/L); empty otherwise.
std::string target_unit(std::string_view target);
// Row label such as "Heart rate (BPM)".
std::string target_display(std::string_view target);

std::string format_mae(double value);

// bp_slash: rows are entry rows, cells "DBP/SBP" (throws LayoutError when either
// member is missing). task_rows: one row per target with its unit annotation.
std::string render_report(const std::vector<ReportEntry>& entries, ReportLayout layout);

// Machine-readable variant, one JSON object per (entry, target).
std::string render_report_records(const std::vector<ReportEntry>& entries);

}  // namespace vitppg
