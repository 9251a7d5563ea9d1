#pragma once

#include <span>
#include <vector>

#include "fracland/fde/caputo.hpp"
#include "fracland/models/equilibria.hpp"

namespace fracland::stochastic {

/// Escape reference rate (1/2pi) sqrt(|F'(X_U)| |F'(x*)|) exp(-dV / sigma^2) from
/// the stable state x* (upper by default) over X_U. Memory-free reference only.
[[nodiscard]] double kramers_rate(const models::RationalModel& model, double sigma, bool from_upper = true);

/// Barrier V(X_U) - V(x*) with V' = -F.
[[nodiscard]] double barrier_height(const models::RationalModel& model, bool from_upper = true);

struct DensityCheck {
  double distance = 0.0;  ///< sup |F_emp - F_theory|
  std::vector<double> x;  ///< grid for the densities below
  std::vector<double> theory;
  std::vector<double> empirical;
};

/// Compares samples of a memory-free additive run with p(x) ~ exp(-2 V(x) / sigma^2).
/// Throws CapabilityError for alpha < 1.
[[nodiscard]] DensityCheck stationary_density_check(std::span<const double> samples, fde::MemoryOrder order,
                                                    const models::RationalModel& model, double sigma,
                                                    std::size_t bins = 200);

/// Total sample variance split into within-region and between-region parts for
/// integer region labels; divisors n, so total = within + between exactly.
struct VarianceSplit {
  double total = 0.0;
  double within = 0.0;
  double between = 0.0;
};
[[nodiscard]] VarianceSplit total_variance_split(std::span<const double> x, std::span<const int> region);

[[nodiscard]] double skewness(std::span<const double> x);

}  // namespace fracland::stochastic
