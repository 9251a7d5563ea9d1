#include "fracland/util/lsq.hpp"

#include <cmath>
#include <optional>

#include "fracland/errors.hpp"

namespace fracland::util {

namespace {

struct Evaluator {
  const ResidualFn& f;
  int count = 0;

  std::optional<Eigen::VectorXd> operator()(const Eigen::VectorXd& x) {
    ++count;
    try {
      Eigen::VectorXd r = f(x);
      if (!r.allFinite()) return std::nullopt;
      return r;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
};

}  // namespace

LsqResult least_squares(const ResidualFn& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper, const LsqOptions& opt) {
  const auto n = x0.size();
  if (lower.size() != n || upper.size() != n) throw FitError("least_squares: bound sizes do not match");
  if ((lower.array() > upper.array()).any()) throw FitError("least_squares: lower bound above upper bound");
  x0 = x0.cwiseMax(lower).cwiseMin(upper);
  Evaluator eval{f};
  auto r0 = eval(x0);
  if (!r0) throw FitError("least_squares: residuals undefined at the initial guess");

  LsqResult res;
  res.x = x0;
  res.residual = *r0;
  res.cost = 0.5 * r0->squaredNorm();
  res.initial_cost = res.cost;
  double mu = opt.damping;

  for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
    const Eigen::VectorXd& x = res.x;
    Eigen::MatrixXd J(res.residual.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double step = opt.fd_step * std::max(std::abs(x[j]), 1.0);
      Eigen::VectorXd xp = x, xm = x;
      xp[j] = std::min(x[j] + step, upper[j]);
      xm[j] = std::max(x[j] - step, lower[j]);
      auto rp = eval(xp);
      auto rm = eval(xm);
      if (!rp) {
        xp = x;
        rp = res.residual;
      }
      if (!rm) {
        xm = x;
        rm = res.residual;
      }
      const double d = xp[j] - xm[j];
      J.col(j) = d > 0.0 ? Eigen::VectorXd((*rp - *rm) / d) : Eigen::VectorXd::Zero(res.residual.size());
    }
    const Eigen::VectorXd g = J.transpose() * res.residual;
    // projected gradient: components pushing into an active bound do not count
    Eigen::VectorXd pg = g;
    for (Eigen::Index j = 0; j < n; ++j) {
      if ((x[j] <= lower[j] && g[j] > 0.0) || (x[j] >= upper[j] && g[j] < 0.0)) pg[j] = 0.0;
    }
    if (pg.lpNorm<Eigen::Infinity>() <= opt.gtol) {
      res.converged = true;
      res.status = "projected gradient below tolerance";
      break;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    Eigen::VectorXd diag = A.diagonal().cwiseMax(1e-12);

    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      Eigen::MatrixXd M = A;
      M.diagonal() += mu * diag;
      const Eigen::VectorXd delta = M.ldlt().solve(-g);
      const Eigen::VectorXd xn = (x + delta).cwiseMax(lower).cwiseMin(upper);
      const Eigen::VectorXd step = xn - x;
      auto rn = eval(xn);
      const double cn = rn ? 0.5 * rn->squaredNorm() : HUGE_VAL;
      if (rn && cn < res.cost) {
        const double drop = (res.cost - cn) / std::max(res.cost, 1e-300);
        res.x = xn;
        res.residual = *rn;
        res.cost = cn;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (drop < opt.ftol) {
          res.converged = true;
          res.status = "relative cost decrease below tolerance";
        } else if (step.norm() <= opt.xtol * (res.x.norm() + opt.xtol)) {
          res.converged = true;
          res.status = "step below tolerance";
        }
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted) {
      res.converged = true;
      res.status = "no decreasing step found";
      break;
    }
    if (res.converged) break;
  }
  if (!res.converged) res.status = "iteration limit reached";
  res.evaluations = eval.count;
  return res;
}

}  // namespace fracland::util
