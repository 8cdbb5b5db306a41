#include "eapcr/metrics.hpp"

#include <cmath>
#include <numeric>

#include "eapcr/error.hpp"

namespace eapcr::eval {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) {
    throw DimensionError("metric inputs differ in length: " + std::to_string(y.size()) + " vs " +
                         std::to_string(y_hat.size()));
  }
  if (y.empty()) throw ContractError("metrics need at least one value");
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> y_hat) { return std::sqrt(mse(y, y_hat)); }

double r2(std::span<const double> y, std::span<const double> y_hat) {
  check_lengths(y, y_hat);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ssr = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ssr += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  if (sst == 0.0) throw UndefinedMetricError("R^2 is undefined: all targets are identical");
  return 1.0 - ssr / sst;
}

std::optional<double> try_r2(std::span<const double> y, std::span<const double> y_hat) {
  try {
    return r2(y, y_hat);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

Metrics compute_metrics(std::span<const double> y, std::span<const double> y_hat) {
  Metrics m;
  m.mae = mae(y, y_hat);
  m.mse = mse(y, y_hat);
  m.rmse = std::sqrt(m.mse);
  m.r2 = try_r2(y, y_hat);
  return m;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return a;
}

void MetricsReport::finalize() {
  std::vector<double> maes, mses, rmses, r2s;
  for (const auto& r : runs) {
    maes.push_back(r.metrics.mae);
    mses.push_back(r.metrics.mse);
    rmses.push_back(r.metrics.rmse);
    if (r.metrics.r2) r2s.push_back(*r.metrics.r2);
  }
  mae = aggregate(maes);
  mse = aggregate(mses);
  rmse = aggregate(rmses);
  r2.reset();
  if (!r2s.empty()) r2 = aggregate(r2s);

  if (!predictions.empty()) {
    std::vector<double> y, y_hat;
    for (const auto& p : predictions) {
      y.push_back(p.y_true);
      y_hat.push_back(p.y_pred);
    }
    pooled = compute_metrics(y, y_hat);
  }
}

}  // namespace eapcr::eval
