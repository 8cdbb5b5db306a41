#pragma once

// Split protocols around the fit-encode-train-predict cycle. Every partition
// refits the feature pipeline and target scaler on its own training rows.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eapcr/features.hpp"
#include "eapcr/metrics.hpp"
#include "eapcr/model.hpp"
#include "eapcr/ridge.hpp"
#include "eapcr/trainer.hpp"

namespace eapcr::eval {

struct Dataset {
  features::FeatureSchema schema;
  features::RowTable rows;
  std::size_t target = 0;  // index into schema.targets

  const std::string& target_name() const { return schema.targets.at(target); }
  std::vector<double> target_values(std::span<const std::size_t> indices) const;
};

struct PartitionOutcome {
  RunMetrics run;
  std::vector<PredictionRecord> predictions;
  features::FittedPipeline pipeline;
  train::TrainResult training;
  std::vector<std::string> notes;
};

using OutcomeSink = std::function<void(const PartitionOutcome&)>;

// `architecture` supplies everything but the cardinalities, which come from
// the pipeline fitted on the partition's training rows.
PartitionOutcome evaluate_partition(const Dataset& data, const features::Partition& part,
                                    const model::ModelConfig& architecture, const train::TrainConfig& train_config,
                                    std::string label, int fold = -1);

// One run per seed (holdout) or k runs per seed (k-fold).
MetricsReport evaluate_model(const Dataset& data, const features::SplitSpec& split, std::span<const std::uint64_t> seeds,
                             const model::ModelConfig& architecture, const train::TrainConfig& train_config,
                             const OutcomeSink& sink = {});

// k-fold with the train config's seed driving fold assignment.
MetricsReport kfold_evaluate(const Dataset& data, int k, const model::ModelConfig& architecture,
                             const train::TrainConfig& train_config, const OutcomeSink& sink = {});

// Same splits and metrics as evaluate_model, fitted in closed form.
MetricsReport ridge_baseline(const Dataset& data, const features::SplitSpec& split,
                             std::span<const std::uint64_t> seeds, double lambda);

}  // namespace eapcr::eval
