#include "fracland/models/equilibria.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "fracland/errors.hpp"

namespace fracland::models {

bool EquilibriumSet::bistable() const noexcept {
  return roots.size() == 3 && roots[0].stability == Stability::kStable &&
         roots[1].stability == Stability::kUnstable && roots[2].stability == Stability::kStable;
}

double EquilibriumSet::lower_stable() const {
  if (!bistable()) throw DomainError("equilibria: model is not bistable");
  return roots[0].x;
}
double EquilibriumSet::unstable() const {
  if (!bistable()) throw DomainError("equilibria: model is not bistable");
  return roots[1].x;
}
double EquilibriumSet::upper_stable() const {
  if (!bistable()) throw DomainError("equilibria: model is not bistable");
  return roots[2].x;
}

namespace {

std::vector<double> polynomial_real_roots(const std::array<double, 4>& a, bool& degenerate) {
  std::vector<double> out;
  int degree = 3;
  while (degree > 0 && a[degree] == 0.0) --degree;
  degenerate = degree < 3;
  if (degree == 0) return out;
  if (degree == 1) {
    out.push_back(-a[0] / a[1]);
    return out;
  }
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 1; i < degree; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < degree; ++i) comp(i, degree - 1) = -a[i] / a[degree];
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (int i = 0; i < degree; ++i) {
    const auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) <= 1e-6 * std::max(1.0, std::abs(z.real()))) out.push_back(z.real());
  }
  auto p = [&](double x) {
    double v = 0.0;
    for (int k = degree; k >= 0; --k) v = v * x + a[k];
    return v;
  };
  auto dp = [&](double x) {
    double v = 0.0;
    for (int k = degree; k >= 1; --k) v = v * x + k * a[k];
    return v;
  };
  for (double& x : out) {
    for (int it = 0; it < 6; ++it) {
      const double d = dp(x);
      if (d == 0.0) break;
      const double step = p(x) / d;
      if (!std::isfinite(step) || std::abs(step) > 1e-3 * std::max(1.0, std::abs(x))) break;
      x -= step;
    }
  }
  std::sort(out.begin(), out.end());
  std::vector<double> dedup;
  for (double x : out) {
    if (dedup.empty() || std::abs(x - dedup.back()) > kRootTolerance) dedup.push_back(x);
  }
  return dedup;
}

std::size_t simple_root_count(const EquilibriumSet& s) {
  return static_cast<std::size_t>(std::count_if(s.roots.begin(), s.roots.end(), [](const Equilibrium& e) {
    return e.stability != Stability::kDegenerate;
  }));
}

}  // namespace

EquilibriumSet equilibria(const RationalModel& model) {
  for (double c : model.coefficients()) {
    if (!std::isfinite(c)) throw DomainError("equilibria: non-finite coefficient");
  }
  EquilibriumSet set;
  const auto xs = polynomial_real_roots(model.coefficients(), set.degenerate);
  for (double x : xs) {
    if (!(model.q(x) > 0.0)) continue;
    Equilibrium e;
    e.x = x;
    e.slope = model.dp(x) / model.q(x);
    const double scale = std::max({1.0, std::abs(model.coefficients()[1]), std::abs(model.coefficients()[3])});
    if (std::abs(e.slope) <= 1e-12 * scale) {
      e.stability = Stability::kDegenerate;
    } else {
      e.stability = e.slope < 0.0 ? Stability::kStable : Stability::kUnstable;
    }
    set.roots.push_back(e);
  }
  return set;
}

double cubic_discriminant(const RationalModel& model) {
  const auto& c = model.coefficients();
  const double a = c[3], b = c[2], cc = c[1], d = c[0];
  return 18.0 * a * b * cc * d - 4.0 * b * b * b * d + b * b * cc * cc - 4.0 * a * cc * cc * cc -
         27.0 * a * a * d * d;
}

BifurcationSweep bifurcation_sweep(const RationalModel& model, const std::string& parameter, double lo, double hi,
                                   std::size_t resolution) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) throw DomainError("sweep: invalid range");
  if (resolution < 2) throw DomainError("sweep: resolution must be >= 2");
  BifurcationSweep out;
  out.parameter = parameter;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
    out.values.push_back(v);
    out.branches.push_back(equilibria(model.with_parameter(parameter, v)));
  }
  for (std::size_t i = 1; i < resolution; ++i) {
    const auto n0 = simple_root_count(out.branches[i - 1]);
    const auto n1 = simple_root_count(out.branches[i]);
    if (n0 == n1) continue;
    double a = out.values[i - 1];
    double b = out.values[i];
    const double da = cubic_discriminant(model.with_parameter(parameter, a));
    const double db = cubic_discriminant(model.with_parameter(parameter, b));
    const bool by_discriminant = (da > 0.0) != (db > 0.0);
    const bool left_side = by_discriminant ? (da > 0.0) : (n0 > n1);
    while (b - a > 1e-6) {
      const double m = 0.5 * (a + b);
      const auto mm = model.with_parameter(parameter, m);
      const bool side = by_discriminant ? (cubic_discriminant(mm) > 0.0) : (simple_root_count(equilibria(mm)) > std::min(n0, n1));
      if (side == left_side) a = m;
      else b = m;
    }
    FoldPoint fp;
    fp.parameter = 0.5 * (a + b);
    const auto fm = model.with_parameter(parameter, fp.parameter);
    // double root sits where p' vanishes; pick the critical point with the smallest |p|
    const auto& c = fm.coefficients();
    const double qa = 3.0 * c[3], qb = 2.0 * c[2], qc = c[1];
    double best = std::numeric_limits<double>::infinity();
    if (qa != 0.0) {
      const double disc = std::max(0.0, qb * qb - 4.0 * qa * qc);
      for (double sgn : {-1.0, 1.0}) {
        const double x = (-qb + sgn * std::sqrt(disc)) / (2.0 * qa);
        if (std::abs(fm.p(x)) < best) {
          best = std::abs(fm.p(x));
          fp.state = x;
        }
      }
    } else if (qb != 0.0) {
      fp.state = -qc / qb;
    }
    out.folds.push_back(fp);
  }
  return out;
}

std::vector<RationalModel> sample_ensemble(std::size_t n, std::uint64_t seed, const EnsembleBounds& b) {
  if (n < 1) throw DomainError("sample_ensemble: n must be >= 1");
  if (!(b.a1_lo < b.a1_hi && b.a1_hi < 0.0 && b.a3_lo < b.a3_hi && b.a3_hi < 0.0)) {
    throw ConfigError("sample_ensemble: a1 and a3 bounds must be ordered negative intervals");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RationalModel> out;
  out.reserve(n);
  while (out.size() < n) {
    const double a1 = b.a1_lo + (b.a1_hi - b.a1_lo) * unit(rng);
    const double a3 = b.a3_lo + (b.a3_hi - b.a3_lo) * unit(rng);
    const double eta = unit(rng);
    const double base = std::sqrt(4.0 * a1 * a3);
    const double a2 = base + 4.0 * eta * unit(rng);
    auto m = RationalModel::cubic(0.0, a1, a2, a3);
    // a2 landing exactly on the fold has probability zero but would not be bistable
    if (!equilibria(m).bistable()) continue;
    out.push_back(m);
  }
  return out;
}

}  // namespace fracland::models
