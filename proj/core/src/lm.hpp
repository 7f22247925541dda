#pragma once

#include <Eigen/Core>

#include <functional>

namespace iholo::detail {

using Residuals = std::function<void(const Eigen::VectorXd &params, Eigen::VectorXd &residuals)>;

struct LmResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance; ///< (J^T J)^-1 scaled by the residual variance
  double sse{0.0};
  int iterations{0};
  bool converged{false};
};

/// Nonlinear least squares with a forward-difference Jacobian.
LmResult levenberg_marquardt(const Residuals &f, Eigen::Index residual_count, Eigen::VectorXd start);

} // namespace iholo::detail
