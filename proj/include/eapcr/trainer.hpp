#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eapcr/features.hpp"
#include "eapcr/model.hpp"
#include "eapcr/tensor.hpp"

namespace eapcr::train {

using autodiff::Graph;
using autodiff::Tensor;

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 3000;
  std::size_t patience = 50;
  bool early_stopping = true;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  bool scale_targets = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Standardizes targets with statistics of the training split.
struct TargetScaler {
  double mean = 0.0;
  double stddev = 1.0;

  static TargetScaler fit(std::span<const double> targets);
  static TargetScaler identity() { return {}; }
  double transform(double y) const { return (y - mean) / stddev; }
  double inverse(double z) const { return z * stddev + mean; }
  std::vector<double> transform(std::span<const double> ys) const;
  std::vector<double> inverse(std::span<const double> zs) const;
  bool operator==(const TargetScaler&) const = default;
};

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;  // first moments, one per parameter tensor
  std::vector<std::vector<double>> v;  // second moments

  static AdamState zeros_like(std::span<const Tensor> params);
};

struct AdamResult {
  std::vector<Tensor> params;
  AdamState state;
};

// One bias-corrected adaptive-moment update. Pure: inputs are not modified.
// Throws NumericError naming the offending tensor when a gradient is NaN/Inf.
AdamResult adam_step(std::span<const Tensor> params, std::span<const Tensor> grads, const AdamState& state,
                     double learning_rate, std::span<const std::string> names = {});

// (1/B) * sum (pred - target)^2
Tensor mse_loss(Graph& g, const Tensor& predictions, const Tensor& targets);

struct EpochRecord {
  std::size_t epoch = 0;       // 1-based
  double train_mse = 0.0;      // mean batch loss, scaled-target units
  std::optional<double> val_mse;
};

struct TrainResult {
  model::EapcrParams params;  // best validation MSE, or final when not validating
  TargetScaler scaler;
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
  std::optional<std::string> aborted;  // set when training hit a non-finite loss
};

// Seeded mini-batch training on already-encoded rows. When early stopping is
// on, a seeded validation slice is carved from `rows` first.
TrainResult train(const std::vector<features::EncodedRow>& rows, std::span<const double> targets,
                  const model::ModelConfig& model_config, const TrainConfig& config);

// Same, starting from given parameters (the config's cardinalities must
// already match).
TrainResult train_from(const model::EapcrParams& initial, const std::vector<features::EncodedRow>& rows,
                       std::span<const double> targets, const TrainConfig& config);

// Predictions on the original target scale.
std::vector<double> predict_targets(const std::vector<features::EncodedRow>& rows, const model::EapcrParams& params,
                                    const TargetScaler& scaler);

}  // namespace eapcr::train
