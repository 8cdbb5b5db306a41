#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eapcr::eval {

double mae(std::span<const double> y, std::span<const double> y_hat);
double mse(std::span<const double> y, std::span<const double> y_hat);
double rmse(std::span<const double> y, std::span<const double> y_hat);
// 1 - SSR/SST. Throws UndefinedMetricError when every target is identical.
double r2(std::span<const double> y, std::span<const double> y_hat);
// r2, or nullopt where it is undefined
std::optional<double> try_r2(std::span<const double> y, std::span<const double> y_hat);

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;
};

Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat);

// Mean and sample standard deviation; sd of a single value is 0.
struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

Aggregate aggregate(std::span<const double> values);

struct CurvePoint {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  std::optional<double> val_mse;
};

struct RunMetrics {
  std::string label;
  std::uint64_t seed = 0;
  int fold = -1;  // -1 for a holdout split
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Metrics metrics;
  std::size_t best_epoch = 0;
  std::vector<CurvePoint> curve;
};

struct PredictionRecord {
  std::string run;
  std::size_t row = 0;  // index into the dataset as loaded
  double y_true = 0.0;
  double y_pred = 0.0;
};

struct MetricsReport {
  std::string model;   // "eapcr" or "ridge"
  std::string target;
  std::string split;
  std::string config_hash;
  std::vector<RunMetrics> runs;
  std::vector<PredictionRecord> predictions;
  std::vector<std::string> notes;

  // Filled by finalize().
  Aggregate mae, mse, rmse;
  std::optional<Aggregate> r2;  // over runs where R^2 is defined
  Metrics pooled;                // over every prediction record

  void finalize();
};

}  // namespace eapcr::eval
