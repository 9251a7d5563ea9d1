#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace fracland::util {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LsqOptions {
  int max_iter = 200;
  double ftol = 1e-12;  ///< relative cost decrease for convergence
  double xtol = 1e-10;  ///< relative step size for convergence
  double gtol = 1e-12;  ///< projected gradient infinity norm
  double fd_step = 1e-6;  ///< relative central-difference step
  double damping = 1e-3;  ///< initial Levenberg-Marquardt damping
};

struct LsqResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residual;
  double cost = 0.0;  ///< 0.5 |r|^2
  double initial_cost = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
};

/// Bound-constrained Levenberg-Marquardt with projection onto [lower, upper] and a
/// central finite-difference Jacobian (one-sided at active bounds). Steps are
/// accepted only when the cost decreases. A residual function that throws or
/// returns non-finite values marks the trial point as infeasible.
/// Throws FitError when the starting point is infeasible.
[[nodiscard]] LsqResult least_squares(const ResidualFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper, const LsqOptions& options = {});

}  // namespace fracland::util
