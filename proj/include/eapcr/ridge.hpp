#pragma once

#include <span>
#include <vector>

#include "eapcr/features.hpp"

namespace eapcr::eval {

// Closed-form ridge regression on one-hot encoded index vectors. The
// intercept is left unpenalized (columns and targets are centered), and
// one-hot columns that are constant on the training rows are dropped.
struct RidgeModel {
  std::vector<std::size_t> cardinalities;
  std::vector<double> weights;  // one per one-hot slot; dropped slots hold 0
  double intercept = 0.0;
  double lambda = 0.0;

  double predict(const features::EncodedRow& row) const;
  std::vector<double> predict(const std::vector<features::EncodedRow>& rows) const;
};

// Solves (Xc^T Xc + lambda I) w = Xc^T yc. Throws SolverError when the system
// is singular (typically lambda = 0 on one-hot data).
RidgeModel fit_ridge(const std::vector<features::EncodedRow>& rows, std::span<const double> targets,
                     const std::vector<std::size_t>& cardinalities, double lambda);

}  // namespace eapcr::eval
