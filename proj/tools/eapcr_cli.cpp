// eapcr: train, sweep, evaluate and apply the EAPCR tabular regressor.
//
//   eapcr fit      --schema s.json --data d.csv [--target T] [--split-ratio 0.7 | --k-fold 5] ...
//   eapcr sweep    --config c.json --sweep embed_size=8,16,32
//   eapcr baseline --schema s.json --data d.csv --lambda 0.01
//   eapcr predict  --checkpoint runs/checkpoints/seed_0.ckpt --data new.csv
//   eapcr verify-checkpoint --checkpoint runs/checkpoints/seed_0.ckpt
//
// Flags override values from --config. Exit status: 0 success, 1 config or
// data error, 2 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eapcr/checkpoint.hpp"
#include "eapcr/error.hpp"
#include "eapcr/experiment.hpp"

namespace {

using eapcr::io::ExperimentConfig;

struct Flags {
  std::string config, data, schema, target, output;
  std::optional<double> split_ratio, lr, lambda;
  std::optional<int> k_fold, n_bins, impute_k;
  std::optional<std::size_t> embed_size, batch_size, max_epochs, patience, workers;
  std::vector<std::size_t> mlp_hidden;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sweep;
  bool no_early_stop = false, no_scale_targets = false, no_checkpoints = false;
};

void add_experiment_flags(CLI::App* cmd, Flags& f, bool model_flags) {
  cmd->add_option("-c,--config", f.config, "experiment config JSON");
  cmd->add_option("--data", f.data, "CSV data file");
  cmd->add_option("--schema", f.schema, "schema JSON file");
  cmd->add_option("--target", f.target, "target column (default: first in schema)");
  auto* ratio = cmd->add_option("--split-ratio", f.split_ratio, "holdout train fraction");
  cmd->add_option("--k-fold", f.k_fold, "k-fold cross-validation")->excludes(ratio);
  cmd->add_option("--n-bins", f.n_bins, "bins for every numerical column");
  cmd->add_option("--impute-k", f.impute_k, "kNN imputation neighbours");
  cmd->add_option("--seeds", f.seeds, "comma-separated seeds")->delimiter(',');
  cmd->add_option("-o,--output", f.output, "output directory");
  if (!model_flags) {
    cmd->add_option("--lambda", f.lambda, "ridge penalty");
    return;
  }
  cmd->add_option("--embed-size", f.embed_size, "embedding width d");
  cmd->add_option("--mlp-hidden", f.mlp_hidden, "residual MLP hidden widths")->delimiter(',');
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--batch-size", f.batch_size, "mini-batch size");
  cmd->add_option("--max-epochs", f.max_epochs, "epoch cap");
  cmd->add_option("--patience", f.patience, "early-stopping patience");
  cmd->add_flag("--no-early-stop", f.no_early_stop, "train for max-epochs without a validation slice");
  cmd->add_flag("--no-scale-targets", f.no_scale_targets, "train on raw target values");
  cmd->add_flag("--no-checkpoints", f.no_checkpoints, "skip writing checkpoints");
  cmd->add_option("--workers", f.workers, "parallel sweep cells");
  cmd->add_option("--sweep", f.sweep, "param=v1,v2,... (repeatable)");
}

eapcr::io::SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw eapcr::ConfigError("--sweep expects param=v1,v2,..., got '" + text + "'");
  }
  eapcr::io::SweepAxis axis{text.substr(0, eq), {}};
  std::string rest = text.substr(eq + 1);
  std::size_t start = 0;
  while (start <= rest.size()) {
    const auto comma = rest.find(',', start);
    const std::string item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used = 0;
      axis.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw eapcr::ConfigError("--sweep " + axis.param + ": '" + item + "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return axis;
}

ExperimentConfig build_config(const Flags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : eapcr::io::load_config(f.config);
  if (!f.data.empty()) c.data_path = f.data;
  if (!f.schema.empty()) c.schema_path = f.schema;
  if (!f.target.empty()) c.target = f.target;
  if (f.split_ratio) c.split = eapcr::features::SplitSpec::holdout(*f.split_ratio);
  if (f.k_fold) c.split = eapcr::features::SplitSpec::kfold(*f.k_fold);
  if (f.n_bins) c.n_bins = f.n_bins;
  if (f.impute_k) c.impute_k = f.impute_k;
  if (!f.seeds.empty()) c.seeds = f.seeds;
  if (!f.output.empty()) c.output_dir = f.output;
  if (f.lambda) c.ridge_lambda = *f.lambda;
  if (f.embed_size) c.model.embed_size = *f.embed_size;
  if (!f.mlp_hidden.empty()) c.model.mlp_hidden = f.mlp_hidden;
  if (f.lr) c.train.learning_rate = *f.lr;
  if (f.batch_size) c.train.batch_size = *f.batch_size;
  if (f.max_epochs) c.train.max_epochs = *f.max_epochs;
  if (f.patience) c.train.patience = *f.patience;
  if (f.no_early_stop) c.train.early_stopping = false;
  if (f.no_scale_targets) c.train.scale_targets = false;
  if (f.no_checkpoints) c.save_checkpoints = false;
  if (f.workers) c.workers = *f.workers;
  if (!f.sweep.empty()) {
    c.sweep.clear();
    for (const auto& s : f.sweep) c.sweep.push_back(parse_axis(s));
  }
  c.validate();
  return c;
}

int run_fit(const Flags& f, bool require_sweep) {
  const ExperimentConfig c = build_config(f);
  if (require_sweep && c.sweep.empty()) throw eapcr::ConfigError("sweep needs at least one --sweep axis");
  const auto result = eapcr::io::run_experiment(c, &std::cerr);
  if (c.sweep.empty()) {
    const auto& row = result.rows.front();
    if (row.report) {
      std::cout << eapcr::io::render_table(*row.report);
    } else {
      std::cerr << "error: " << row.error << "\n";
    }
  } else {
    std::cout << eapcr::io::render_sweep_table(result.rows);
  }
  std::cerr << "results in " << c.output_dir.string() << "\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EAPCR tabular regression"};
  app.require_subcommand(1);

  Flags fit_flags, sweep_flags, base_flags;
  auto* fit = app.add_subcommand("fit", "train and evaluate over the configured splits and seeds");
  add_experiment_flags(fit, fit_flags, true);
  auto* sweep = app.add_subcommand("sweep", "evaluate every cell of a parameter grid");
  add_experiment_flags(sweep, sweep_flags, true);
  auto* baseline = app.add_subcommand("baseline", "closed-form ridge regression on one-hot features");
  add_experiment_flags(baseline, base_flags, false);

  std::string ckpt_path, predict_data, predict_out;
  auto* predict = app.add_subcommand("predict", "predict with a saved checkpoint");
  predict->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  predict->add_option("--data", predict_data, "CSV with the schema's feature columns")->required();
  predict->add_option("-o,--output", predict_out, "write CSV here instead of stdout");

  std::string verify_path;
  auto* verify = app.add_subcommand("verify-checkpoint", "check a checkpoint's integrity");
  verify->add_option("--checkpoint", verify_path, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return run_fit(fit_flags, false);
    if (*sweep) return run_fit(sweep_flags, true);
    if (*baseline) {
      const auto report = eapcr::io::run_baseline(build_config(base_flags));
      std::cout << eapcr::io::render_table(report);
      return 0;
    }
    if (*predict) {
      const auto table = eapcr::io::predict_from_checkpoint(ckpt_path, predict_data);
      const std::string csv = eapcr::io::prediction_table_csv(table);
      if (predict_out.empty()) {
        std::cout << csv;
      } else {
        eapcr::io::write_text_file(predict_out, csv);
      }
      return 0;
    }
    if (*verify) {
      const auto v = eapcr::io::verify_checkpoint(verify_path);
      if (v.ok) {
        std::cout << "ok: format version " << v.version << ", " << v.tensors << " tensors, " << v.parameters
                  << " parameters\n";
        return 0;
      }
      for (const auto& p : v.problems) std::cout << "problem: " << p << "\n";
      return 1;
    }
  } catch (const eapcr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.numeric() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
