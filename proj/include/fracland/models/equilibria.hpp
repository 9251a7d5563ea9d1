#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fracland/models/rational_model.hpp"

namespace fracland::models {

enum class Stability { kStable, kUnstable, kDegenerate };

struct Equilibrium {
  double x = 0.0;
  double slope = 0.0;  ///< d(p/q)/dx at x
  Stability stability = Stability::kDegenerate;
};

/// Real roots of p inside the domain q > 0, ascending.
struct EquilibriumSet {
  std::vector<Equilibrium> roots;
  bool degenerate = false;  ///< a3 == 0, handled as quadratic or linear

  [[nodiscard]] bool bistable() const noexcept;
  /// Lower stable state; requires bistable().
  [[nodiscard]] double lower_stable() const;
  [[nodiscard]] double unstable() const;
  [[nodiscard]] double upper_stable() const;
};

inline constexpr double kRootTolerance = 1e-9;

[[nodiscard]] EquilibriumSet equilibria(const RationalModel& model);

/// Discriminant of the cubic numerator; positive iff three distinct real roots.
[[nodiscard]] double cubic_discriminant(const RationalModel& model);

struct FoldPoint {
  double parameter = 0.0;
  double state = 0.0;  ///< location of the double root
};

struct BifurcationSweep {
  std::string parameter;
  std::vector<double> values;
  std::vector<EquilibriumSet> branches;
  std::vector<FoldPoint> folds;
};

/// Equilibria over `resolution` evenly spaced values of one parameter; folds are
/// refined to 1e-6 in the parameter.
[[nodiscard]] BifurcationSweep bifurcation_sweep(const RationalModel& model, const std::string& parameter,
                                                 double lo, double hi, std::size_t resolution);

struct EnsembleBounds {
  double a1_lo = -2.0;
  double a1_hi = -0.05;
  double a3_lo = -2.0;
  double a3_hi = -0.05;
};

/// Random bistable cubics: a0 = 0, a1 and a3 uniform negative, and
/// a2 ~ U[sqrt(4 a1 a3), sqrt(4 a1 a3) + 4 eta] with eta ~ U(0, 1).
[[nodiscard]] std::vector<RationalModel> sample_ensemble(std::size_t n, std::uint64_t seed,
                                                         const EnsembleBounds& bounds = {});

}  // namespace fracland::models
