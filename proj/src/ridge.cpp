#include "eapcr/ridge.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <string>

#include "eapcr/error.hpp"

namespace eapcr::eval {

namespace {

std::vector<std::size_t> slot_offsets(const std::vector<std::size_t>& cardinalities) {
  std::vector<std::size_t> out(cardinalities.size(), 0);
  for (std::size_t i = 1; i < cardinalities.size(); ++i) out[i] = out[i - 1] + cardinalities[i - 1];
  return out;
}

constexpr double kMinReciprocalCondition = 1e-13;

}  // namespace

double RidgeModel::predict(const features::EncodedRow& row) const {
  if (row.indices.size() != cardinalities.size()) throw DimensionError("ridge: row length does not match the model");
  const auto offsets = slot_offsets(cardinalities);
  double y = intercept;
  for (std::size_t c = 0; c < row.indices.size(); ++c) {
    // unseen slots beyond the fitted range contribute nothing
    if (row.indices[c] < cardinalities[c]) y += weights[offsets[c] + row.indices[c]];
  }
  return y;
}

std::vector<double> RidgeModel::predict(const std::vector<features::EncodedRow>& rows) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(r));
  return out;
}

RidgeModel fit_ridge(const std::vector<features::EncodedRow>& rows, std::span<const double> targets,
                     const std::vector<std::size_t>& cardinalities, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ridge lambda must be >= 0");
  if (rows.empty() || rows.size() != targets.size()) throw DimensionError("ridge: rows and targets must match and be non-empty");

  const std::size_t n = rows.size();
  const std::size_t width = std::accumulate(cardinalities.begin(), cardinalities.end(), std::size_t{0});
  const auto offsets = slot_offsets(cardinalities);

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].indices.size() != cardinalities.size()) throw DimensionError("ridge: row length does not match cardinalities");
    for (std::size_t c = 0; c < cardinalities.size(); ++c) {
      if (rows[i].indices[c] >= cardinalities[c]) throw LookupError("ridge: index out of range in column " + std::to_string(c));
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offsets[c] + rows[i].indices[c])) = 1.0;
    }
  }
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = targets[i];

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();

  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double m = x_mean(j);
    if (m > 0.0 && m < 1.0) kept.push_back(j);
  }

  RidgeModel model;
  model.cardinalities = cardinalities;
  model.weights.assign(width, 0.0);
  model.lambda = lambda;
  model.intercept = y_mean;
  if (kept.empty()) return model;

  const auto k = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd Xc(static_cast<Eigen::Index>(n), k);
  for (Eigen::Index j = 0; j < k; ++j) Xc.col(j) = X.col(kept[j]).array() - x_mean(kept[j]);
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd G = Xc.transpose() * Xc;
  G.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = Xc.transpose() * yc;

  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinReciprocalCondition) {
    throw SolverError("ridge system is singular (lambda = " + std::to_string(lambda) + "); use lambda > 0");
  }
  const Eigen::VectorXd w = llt.solve(rhs);

  double shift = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    model.weights[static_cast<std::size_t>(kept[j])] = w(j);
    shift += x_mean(kept[j]) * w(j);
  }
  model.intercept = y_mean - shift;
  return model;
}

}  // namespace eapcr::eval
