#include "eapcr/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "eapcr/checkpoint.hpp"
#include "eapcr/csv.hpp"
#include "eapcr/error.hpp"

namespace eapcr::io {

namespace {

std::string cell_directory(std::size_t index, const Assignment& cell) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cell_%03zu", index);
  std::string s = buf;
  for (const auto& [k, v] : cell) s += "_" + k + "=" + format_value(v);
  return s;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string checkpoint_name(std::uint64_t seed, int fold) {
  std::string s = "seed_" + std::to_string(seed);
  if (fold >= 0) s += "_fold_" + std::to_string(fold);
  return s + ".ckpt";
}

features::FeatureSchema with_n_bins(features::FeatureSchema schema, int n_bins) {
  for (auto& c : schema.columns) {
    if (c.kind == features::ColumnKind::Numerical) c.n_bins = n_bins;
  }
  schema.validate();
  return schema;
}

features::SplitSpec resolve_split(const ExperimentConfig& config) {
  if (config.split) return *config.split;
  if (!config.schema_path.empty()) {
    const SchemaFile file = load_schema_file(config.schema_path);
    if (file.split) return *file.split;
  }
  return features::SplitSpec::holdout(0.7);
}

eval::Dataset load_dataset(const ExperimentConfig& config, std::vector<std::string>* notes) {
  if (config.schema_path.empty()) throw ConfigError("no schema file given");
  if (config.data_path.empty()) throw ConfigError("no data file given");
  const SchemaFile file = load_schema_file(config.schema_path);

  eval::Dataset data;
  data.schema = file.schema;
  LoadedTable table = load_csv(config.data_path, data.schema);
  if (table.rows.empty()) throw DataError(config.data_path.string() + ": no data rows");

  const std::optional<int> k = config.impute_k ? config.impute_k : file.impute_k;
  if (k) {
    features::ImputeReport rep;
    table.rows = features::knn_impute(table.rows, data.schema, *k, &rep);
    if (notes && rep.cells_imputed > 0) {
      notes->push_back("imputed " + std::to_string(rep.cells_imputed) + " numerical cell(s) in " +
                       std::to_string(rep.rows_imputed) + " row(s) with k=" + std::to_string(*k));
    }
  }
  data.rows = std::move(table.rows);

  if (config.target.empty()) {
    data.target = 0;
  } else if (auto t = data.schema.target_index(config.target)) {
    data.target = *t;
  } else {
    throw ConfigError("target '" + config.target + "' is not declared in the schema");
  }
  if (config.n_bins) data.schema = with_n_bins(data.schema, *config.n_bins);
  return data;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  std::vector<std::string> load_notes;
  ExperimentConfig base = config;
  base.n_bins.reset();
  const eval::Dataset raw = load_dataset(base, &load_notes);
  const features::SplitSpec split = resolve_split(config);
  const auto grid = sweep_grid(config.sweep);
  const bool single = config.sweep.empty();

  ExperimentResult result;
  result.rows.resize(grid.size());
  std::vector<int> codes(grid.size(), kExitOk);
  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << line << std::endl;
  };

  auto run_cell = [&](std::size_t i) {
    SweepRow& row = result.rows[i];
    row.cell = grid[i];
    row.directory = single ? "." : cell_directory(i, grid[i]);
    const std::filesystem::path dir = single ? config.output_dir : config.output_dir / row.directory;
    const std::string tag = "[" + (single ? std::string("fit") : row.directory) + "] ";
    try {
      const ExperimentConfig cell = apply_assignment(config, grid[i]);
      eval::Dataset data = raw;
      if (cell.n_bins) data.schema = with_n_bins(data.schema, *cell.n_bins);
      std::filesystem::create_directories(dir);

      eval::OutcomeSink sink;
      if (cell.save_checkpoints) {
        sink = [&](const eval::PartitionOutcome& o) {
          const Checkpoint ckpt{data.target_name(), o.pipeline, o.training.scaler, o.training.params};
          std::filesystem::create_directories(dir / "checkpoints");
          save_checkpoint(dir / "checkpoints" / checkpoint_name(o.run.seed, o.run.fold), ckpt);
        };
      }
      say(tag + "training " + std::to_string(cell.seeds.size()) + " seed(s), split " +
          split.describe());
      eval::MetricsReport report = eval::evaluate_model(data, split, cell.seeds, cell.model, cell.train, sink);
      report.config_hash = config_hash(cell);
      report.notes.insert(report.notes.begin(), load_notes.begin(), load_notes.end());
      emit_report(report, dir);
      write_text_file(dir / "config.json", config_to_json(cell).dump(2) + "\n");
      say(tag + "done");
      row.report = std::move(report);
    } catch (const Error& e) {
      row.error = e.what();
      codes[i] = e.numeric() ? kExitNumeric : kExitConfigOrData;
      say(tag + "failed: " + row.error);
    } catch (const std::exception& e) {
      row.error = e.what();
      codes[i] = kExitConfigOrData;
      say(tag + "failed: " + row.error);
    }
  };

  const std::size_t workers = std::min(config.workers, grid.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < grid.size(); i = next++) run_cell(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  if (!single) emit_sweep(result.rows, config.output_dir);
  for (int c : codes) result.exit_code = std::max(result.exit_code, c);
  return result;
}

eval::MetricsReport run_baseline(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::string> notes;
  const eval::Dataset data = load_dataset(config, &notes);
  eval::MetricsReport report = eval::ridge_baseline(data, resolve_split(config), config.seeds, config.ridge_lambda);
  report.config_hash = config_hash(config);
  report.notes.insert(report.notes.begin(), notes.begin(), notes.end());
  emit_report(report, config.output_dir);
  return report;
}

PredictionTable predict_from_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& csv) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  CsvOptions options;
  options.require_targets = false;
  const LoadedTable table = load_csv(csv, ckpt.pipeline.schema, options);
  const auto x = features::transform_rows(table.rows, ckpt.pipeline);

  PredictionTable out;
  out.target = ckpt.target;
  out.y_pred = train::predict_targets(x, ckpt.params, ckpt.scaler);
  const auto t = ckpt.pipeline.schema.target_index(ckpt.target);
  for (const auto& row : table.rows) {
    out.y_true.push_back(t ? row.targets.at(*t) : std::nan(""));
  }
  return out;
}

std::string prediction_table_csv(const PredictionTable& table) {
  std::string s = "row,y_pred,y_true\n";
  for (std::size_t i = 0; i < table.y_pred.size(); ++i) {
    s += std::to_string(i) + "," + full(table.y_pred[i]) + "," +
         (std::isnan(table.y_true[i]) ? std::string() : full(table.y_true[i])) + "\n";
  }
  return s;
}

}  // namespace eapcr::io
