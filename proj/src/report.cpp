#include "vitppg/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "vitppg/common.hpp"

namespace vitppg {

namespace {

struct TargetInfo {
  std::string_view name;
  std::string_view display;
  std::string_view unit;
};

constexpr TargetInfo kTargets[] = {
    {"dbp", "DBP", "mmHg"},          {"sbp", "SBP", "mmHg"},
    {"hr", "Heart rate", "BPM"},     {"rr", "Respiratory rate", "BRPM"},
    {"spo2", "SpO2", "%"},           {"sodium", "Sodium", "MEQ/L"},
    {"potassium", "Potassium", "MEQ/L"}, {"lactate", "Lactate", "MMOL/L"},
};

const TargetInfo* find_target(std::string_view target) {
  for (const auto& t : kTargets) {
    if (t.name == target) return &t;
  }
  return nullptr;
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

std::string render_table(const std::string& corner, const std::vector<std::string>& columns,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(columns.size() + 1, 0);
  widths[0] = corner.size();
  for (std::size_t c = 0; c < columns.size(); ++c) widths[c + 1] = columns[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      os << (c == 0 ? "" : " | ") << cells[c] << std::string(widths[c] - cells[c].size(), ' ');
    }
    os << '\n';
  };
  std::vector<std::string> header{corner};
  header.insert(header.end(), columns.begin(), columns.end());
  emit(header);
  for (std::size_t c = 0; c < widths.size(); ++c) os << (c == 0 ? "" : "-|-") << std::string(widths[c], '-');
  os << '\n';
  for (const auto& r : rows) emit(r);
  return os.str();
}

const double* find_mae(const std::vector<ReportEntry>& entries, const std::string& row, const std::string& column,
                       const std::string& target) {
  for (const auto& e : entries) {
    if (e.row != row || e.column != column) continue;
    const auto it = e.report.mae.find(target);
    if (it != e.report.mae.end()) return &it->second;
  }
  return nullptr;
}

}  // namespace

ReportLayout parse_report_layout(std::string_view name) {
  if (name == "bp_slash") return ReportLayout::bp_slash;
  if (name == "task_rows") return ReportLayout::task_rows;
  throw ConfigError("unknown report layout '" + std::string(name) + "'");
}

std::string target_unit(std::string_view target) {
  const auto* t = find_target(target);
  return t ? std::string(t->unit) : std::string();
}

std::string target_display(std::string_view target) {
  const auto* t = find_target(target);
  if (t == nullptr) return std::string(target);
  return std::string(t->display) + " (" + std::string(t->unit) + ")";
}

std::string format_mae(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::string render_report(const std::vector<ReportEntry>& entries, ReportLayout layout) {
  std::vector<std::string> columns;
  for (const auto& e : entries) push_unique(columns, e.column);

  std::vector<std::vector<std::string>> rows;
  if (layout == ReportLayout::bp_slash) {
    std::vector<std::string> row_names;
    for (const auto& e : entries) push_unique(row_names, e.row);
    for (const auto& r : row_names) {
      std::vector<std::string> cells{r};
      for (const auto& c : columns) {
        const double* dbp = find_mae(entries, r, c, "dbp");
        const double* sbp = find_mae(entries, r, c, "sbp");
        if (dbp == nullptr || sbp == nullptr) {
          throw LayoutError("bp_slash: row '" + r + "', column '" + c + "' needs both dbp and sbp reports");
        }
        cells.push_back(format_mae(*dbp) + "/" + format_mae(*sbp));
      }
      rows.push_back(std::move(cells));
    }
    return render_table("BP dataset", columns, rows);
  }

  std::vector<std::string> targets;
  for (const auto& e : entries) {
    for (const auto& [t, _] : e.report.mae) push_unique(targets, t);
  }
  for (const auto& t : targets) {
    std::vector<std::string> cells{target_display(t)};
    for (const auto& c : columns) {
      const double* v = nullptr;
      for (const auto& e : entries) {
        if (e.column != c) continue;
        const auto it = e.report.mae.find(t);
        if (it != e.report.mae.end()) v = &it->second;
      }
      cells.push_back(v ? format_mae(*v) : "-");
    }
    rows.push_back(std::move(cells));
  }
  return render_table("Estimand", columns, rows);
}

std::string render_report_records(const std::vector<ReportEntry>& entries) {
  std::ostringstream os;
  for (const auto& e : entries) {
    for (const auto& [target, mae] : e.report.mae) {
      nlohmann::json j{{"row", e.row},           {"column", e.column},
                       {"target", target},       {"unit", target_unit(target)},
                       {"mae", mae},             {"count", e.report.count},
                       {"fingerprint", e.report.fingerprint}};
      os << j.dump() << '\n';
    }
  }
  return os.str();
}

}  // namespace vitppg
