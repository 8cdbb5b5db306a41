#pragma once

// Config-driven runs: load data, expand the sweep grid, evaluate every cell
// and write reports, checkpoints and the aggregate table.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "eapcr/config.hpp"
#include "eapcr/evaluation.hpp"
#include "eapcr/report.hpp"

namespace eapcr::io {

// Reads the schema file and CSV, imputes when impute_k is set (config first,
// then schema file), selects the target and applies the n_bins override.
eval::Dataset load_dataset(const ExperimentConfig& config, std::vector<std::string>* notes = nullptr);

// Config split, else the schema file's, else holdout 0.7.
features::SplitSpec resolve_split(const ExperimentConfig& config);

// Every numerical column gets `n_bins`.
features::FeatureSchema with_n_bins(features::FeatureSchema schema, int n_bins);

enum ExitCode { kExitOk = 0, kExitConfigOrData = 1, kExitNumeric = 2 };

struct ExperimentResult {
  std::vector<SweepRow> rows;
  int exit_code = kExitOk;
};

// Runs every grid cell (in parallel over config.workers threads). A failing
// cell is recorded in its row and does not stop the others. With no sweep
// axes the single cell writes straight into output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Closed-form ridge on the same splits; report goes to output_dir.
eval::MetricsReport run_baseline(const ExperimentConfig& config);

// Predictions for every row of `csv` with a saved model. Targets are optional
// in the file; when present they appear in the output.
struct PredictionTable {
  std::string target;
  std::vector<double> y_pred;
  std::vector<double> y_true;  // NaN where absent
};

PredictionTable predict_from_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& csv);
std::string prediction_table_csv(const PredictionTable& table);

std::string checkpoint_name(std::uint64_t seed, int fold);

}  // namespace eapcr::io
