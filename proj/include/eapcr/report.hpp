#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eapcr/config.hpp"
#include "eapcr/metrics.hpp"

namespace eapcr::io {

json report_to_json(const eval::MetricsReport& report);

// Human-readable summary: one "mean ± sd" line per metric at 3 decimals, then
// a per-run breakdown and any notes.
std::string render_table(const eval::MetricsReport& report);

std::string predictions_csv(const eval::MetricsReport& report);
std::string curves_csv(const eval::MetricsReport& report);

// Writes report.json, report.txt, predictions.csv and curves.csv into `dir`
// (created if needed).
void emit_report(const eval::MetricsReport& report, const std::filesystem::path& dir);

// One row of a sweep's aggregate table.
struct SweepRow {
  Assignment cell;
  std::string directory;                   // relative to the sweep output dir
  std::optional<eval::MetricsReport> report;
  std::string error;                       // set when the cell failed
};

std::string render_sweep_table(const std::vector<SweepRow>& rows);
json sweep_to_json(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);
// sweep.txt, sweep.json and sweep.csv
void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

// Compact parameter value: integers without a decimal point, otherwise %g.
std::string format_value(double v);

}  // namespace eapcr::io
