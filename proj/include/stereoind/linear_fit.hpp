#pragma once

#include <Eigen/Dense>

namespace stereoind::linalg {

struct LeastSquares {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  Eigen::Index rank = 0;
  bool rank_deficient = false;
};

// Ordinary least squares with an unpenalized intercept. Columns and target
// are centered first, so the intercept stays out of the minimum-norm
// criterion that picks a solution when the design is rank deficient: a
// constant target yields intercept = target and zero coefficients.
LeastSquares fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

}  // namespace stereoind::linalg
