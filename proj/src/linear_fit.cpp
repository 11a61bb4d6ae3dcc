#include "stereoind/linear_fit.hpp"

#include <cmath>

#include "stereoind/errors.hpp"

namespace stereoind::linalg {

LeastSquares fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw FitError("design rows and target length differ");
  if (x.rows() == 0) throw FitError("no observations");
  if (!x.allFinite() || !y.allFinite()) throw FitError("non-finite value in design or target");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LeastSquares out;
  if (x.cols() == 0) {
    out.intercept = y_mean;
    out.coefficients = Eigen::VectorXd(0);
    return out;
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  // Relative to the largest column scale; exact one-hot collinearity lands
  // far below this.
  cod.setThreshold(1e-10);
  cod.compute(xc);
  out.coefficients = cod.solve(yc);
  out.rank = cod.rank();
  out.rank_deficient = out.rank < x.cols();
  out.intercept = y_mean - x_mean.dot(out.coefficients);
  return out;
}

}  // namespace stereoind::linalg
