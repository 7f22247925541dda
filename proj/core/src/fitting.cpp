#include "lm.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <cmath>

namespace iholo::detail {
namespace {

struct Functor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const Residuals *f;
  Eigen::Index n;
  Eigen::Index m;

  int operator()(const Eigen::VectorXd &x, Eigen::VectorXd &r) const {
    (*f)(x, r);
    return 0;
  }
  Eigen::Index inputs() const { return n; }
  Eigen::Index values() const { return m; }
};

Eigen::MatrixXd jacobian(const Residuals &f, const Eigen::VectorXd &x, Eigen::Index m) {
  Eigen::MatrixXd J(m, x.size());
  Eigen::VectorXd rp(m), rm(m);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double h = 1e-6 * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    f(xp, rp);
    f(xm, rm);
    J.col(j) = (rp - rm) / (2 * h);
  }
  return J;
}

} // namespace

LmResult levenberg_marquardt(const Residuals &f, Eigen::Index residual_count, Eigen::VectorXd start) {
  Functor fn{&f, start.size(), residual_count};
  Eigen::NumericalDiff<Functor> diff(fn);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor>> lm(diff);
  lm.parameters.maxfev = 4000;
  lm.parameters.xtol = 1e-12;
  lm.parameters.ftol = 1e-12;
  auto status = lm.minimize(start);

  LmResult out;
  out.params = start;
  out.iterations = static_cast<int>(lm.iter);
  out.converged = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::GtolTooSmall;
  Eigen::VectorXd r(residual_count);
  f(start, r);
  out.sse = r.squaredNorm();
  Eigen::MatrixXd J = jacobian(f, start, residual_count);
  const double dof = std::max<double>(1.0, static_cast<double>(residual_count - start.size()));
  Eigen::MatrixXd JtJ = J.transpose() * J;
  out.covariance = JtJ.completeOrthogonalDecomposition().pseudoInverse() * (out.sse / dof);
  return out;
}

} // namespace iholo::detail
