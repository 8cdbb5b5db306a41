#include "eapcr/evaluation.hpp"

#include <algorithm>

#include "eapcr/error.hpp"

namespace eapcr::eval {

std::vector<double> Dataset::target_values(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(rows.at(i).targets.at(target));
  return out;
}

namespace {

std::string run_label(std::uint64_t seed, int fold) {
  std::string s = "seed=" + std::to_string(seed);
  if (fold >= 0) s += " fold=" + std::to_string(fold);
  return s;
}

std::vector<std::string> pipeline_notes(const features::FittedPipeline& p) {
  std::vector<std::string> notes;
  for (std::size_t c = 0; c < p.schema.n(); ++c) {
    const auto& d = p.discretizers[c];
    if (d && d->effective_bins() < static_cast<std::size_t>(d->requested_bins)) {
      notes.push_back("column '" + p.schema.columns[c].name + "': " + std::to_string(d->requested_bins) +
                      " bins requested, " + std::to_string(d->effective_bins()) + " after collapsing duplicate edges");
    }
  }
  if (model::build_permutation(p.schema.n()).degenerate()) {
    notes.push_back("permutation is the identity for N=" + std::to_string(p.schema.n()) +
                    "; the permuted branch sees the unpermuted matrix");
  }
  return notes;
}

void merge_notes(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& n : from) {
    if (std::find(into.begin(), into.end(), n) == into.end()) into.push_back(n);
  }
}

}  // namespace

PartitionOutcome evaluate_partition(const Dataset& data, const features::Partition& part,
                                    const model::ModelConfig& architecture, const train::TrainConfig& train_config,
                                    std::string label, int fold) {
  const features::RowTable train_rows = features::select_rows(data.rows, part.train);
  const features::RowTable test_rows = features::select_rows(data.rows, part.test);

  PartitionOutcome out;
  out.pipeline = features::fit_pipeline(train_rows, data.schema);
  out.notes = pipeline_notes(out.pipeline);

  model::ModelConfig config = architecture;
  config.cardinalities = out.pipeline.cardinalities();

  const auto x_train = features::transform_rows(train_rows, out.pipeline);
  const auto x_test = features::transform_rows(test_rows, out.pipeline);
  const auto y_train = data.target_values(part.train);
  const auto y_test = data.target_values(part.test);

  out.training = train::train(x_train, y_train, config, train_config);
  if (out.training.aborted) throw NumericError("training aborted: " + *out.training.aborted);
  const auto y_hat = train::predict_targets(x_test, out.training.params, out.training.scaler);

  out.run.label = std::move(label);
  out.run.seed = train_config.seed;
  out.run.fold = fold;
  out.run.n_train = part.train.size();
  out.run.n_test = part.test.size();
  out.run.metrics = compute_metrics(y_test, y_hat);
  out.run.best_epoch = out.training.best_epoch;
  for (const auto& e : out.training.curve) out.run.curve.push_back({e.epoch, e.train_mse, e.val_mse});
  for (std::size_t i = 0; i < part.test.size(); ++i) {
    out.predictions.push_back({out.run.label, part.test[i], y_test[i], y_hat[i]});
  }
  return out;
}

MetricsReport evaluate_model(const Dataset& data, const features::SplitSpec& split, std::span<const std::uint64_t> seeds,
                             const model::ModelConfig& architecture, const train::TrainConfig& train_config,
                             const OutcomeSink& sink) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  MetricsReport report;
  report.model = "eapcr";
  report.target = data.target_name();
  report.split = split.describe();
  for (std::uint64_t seed : seeds) {
    const auto parts = features::split_dataset(data.rows.size(), split, seed);
    train::TrainConfig tc = train_config;
    tc.seed = seed;
    for (std::size_t f = 0; f < parts.size(); ++f) {
      const int fold = split.kind == features::SplitSpec::Kind::KFold ? static_cast<int>(f) : -1;
      PartitionOutcome o = evaluate_partition(data, parts[f], architecture, tc, run_label(seed, fold), fold);
      if (sink) sink(o);
      merge_notes(report.notes, o.notes);
      report.runs.push_back(std::move(o.run));
      report.predictions.insert(report.predictions.end(), o.predictions.begin(), o.predictions.end());
    }
  }
  report.finalize();
  return report;
}

MetricsReport kfold_evaluate(const Dataset& data, int k, const model::ModelConfig& architecture,
                             const train::TrainConfig& train_config, const OutcomeSink& sink) {
  const std::uint64_t seeds[] = {train_config.seed};
  return evaluate_model(data, features::SplitSpec::kfold(k), seeds, architecture, train_config, sink);
}

MetricsReport ridge_baseline(const Dataset& data, const features::SplitSpec& split,
                             std::span<const std::uint64_t> seeds, double lambda) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  MetricsReport report;
  report.model = "ridge";
  report.target = data.target_name();
  report.split = split.describe();
  for (std::uint64_t seed : seeds) {
    const auto parts = features::split_dataset(data.rows.size(), split, seed);
    for (std::size_t f = 0; f < parts.size(); ++f) {
      const int fold = split.kind == features::SplitSpec::Kind::KFold ? static_cast<int>(f) : -1;
      const auto& part = parts[f];
      const auto train_rows = features::select_rows(data.rows, part.train);
      const auto pipeline = features::fit_pipeline(train_rows, data.schema);
      merge_notes(report.notes, pipeline_notes(pipeline));
      const auto x_train = features::transform_rows(train_rows, pipeline);
      const auto x_test = features::transform_rows(features::select_rows(data.rows, part.test), pipeline);
      const auto y_train = data.target_values(part.train);
      const auto y_test = data.target_values(part.test);

      const RidgeModel ridge = fit_ridge(x_train, y_train, pipeline.cardinalities(), lambda);
      const auto y_hat = ridge.predict(x_test);

      RunMetrics run;
      run.label = run_label(seed, fold);
      run.seed = seed;
      run.fold = fold;
      run.n_train = part.train.size();
      run.n_test = part.test.size();
      run.metrics = compute_metrics(y_test, y_hat);
      for (std::size_t i = 0; i < part.test.size(); ++i) {
        report.predictions.push_back({run.label, part.test[i], y_test[i], y_hat[i]});
      }
      report.runs.push_back(std::move(run));
    }
  }
  report.finalize();
  return report;
}

}  // namespace eapcr::eval
