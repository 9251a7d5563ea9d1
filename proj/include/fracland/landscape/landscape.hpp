#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fracland/fde/caputo.hpp"
#include "fracland/models/equilibria.hpp"

namespace fracland::landscape {

/// Relative potential on a uniform state grid, zero at the anchor (X_U).
struct LandscapeProfile {
  std::vector<double> x;
  std::vector<double> V;
  std::vector<int> side;  ///< -1 left of the anchor, +1 otherwise
  double spacing = 0.0;
  double anchor = 0.0;
  double alpha = 1.0;
};

struct ReconstructOptions {
  /// Largest allowed hole in the sampled states; <= 0 picks 2% of the window plus two grid cells.
  double max_gap = 0.0;
  /// Samples with |dZ/dt| below this are dropped.
  double min_speed = 1e-12;
};

/// Potential from trajectories on [x_lo, x_hi]:
/// 4th-order central dZ/dt, sort by state, PCHIP onto a grid of spacing step/2,
/// V = -int dZ/dt dZ by cumulative Simpson, shifted so V(anchor) = 0.
/// Throws CoverageError when the samples leave a hole larger than max_gap.
[[nodiscard]] LandscapeProfile reconstruct_potential(const std::vector<fde::Trajectory>& trajectories, double x_lo,
                                                     double x_hi, double anchor, double step,
                                                     const ReconstructOptions& options = {});

/// Grid step for a landscape window: 2 (x_hi - x_lo) / step points.
[[nodiscard]] std::size_t landscape_grid_points(double x_lo, double x_hi, double step);

/// Samples of (state, dZ/dt) along one trajectory, 4th-order stencil at interior nodes.
struct VelocitySample {
  double x;
  double v;
};
[[nodiscard]] std::vector<VelocitySample> velocity_samples(const fde::Trajectory& tr);

struct BasinMetrics {
  double minimum = 0.0;    ///< state of the basin minimum
  double depth = 0.0;
  double curvature = 0.0;  ///< V'' at the minimum
  std::optional<double> flatness;
  std::optional<double> sharpness;
};

/// Metrics of the basin right of the anchor (the positive stable state).
/// Throws MetricError when the minimum lies within two cells of the grid edge.
[[nodiscard]] BasinMetrics basin_metrics(const LandscapeProfile& profile);

/// Fills flatness = ceil(max |curvature|) - |curvature| and
/// sharpness = (normalized depth + normalized |curvature|) / 2 over a batch.
/// Returns the ceiled curvature used.
double apply_ensemble_context(std::vector<BasinMetrics>& batch);

/// Closed-form potential V with V' = -F for cubic and quorum models.
/// Throws CapabilityError otherwise.
[[nodiscard]] std::function<double(double)> analytic_potential(const models::RationalModel& model);

/// Cumulative integral of uniformly spaced samples: Simpson on interval pairs,
/// trapezoid on a trailing odd interval.
[[nodiscard]] std::vector<double> cumulative_simpson(const std::vector<double>& f, double dx);

/// Trajectory set and window for one model landscape.
struct LandscapeSetup {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double h = 0.01;
  double t_end = 100.0;
  /// Start offset from X_U as a fraction of X_S2 - X_S1.
  double epsilon_fraction = 1e-3;
  fde::SolverOptions solver{};
};

/// h halved until one step of the largest drift on [x_lo, x_hi] moves less than
/// 0.5% of the window; keeps steep models inside the reconstruction's gap limit.
[[nodiscard]] double landscape_step(const models::RationalModel& model, double x_lo, double x_hi, double h);

/// Window [X_S1, X_S2 + (X_S2 - X_U)/2], which keeps the positive minimum interior.
[[nodiscard]] LandscapeSetup default_setup(const models::EquilibriumSet& eq, double h, double t_end);

/// Trajectories from X_U - eps and X_U + eps, plus runs entering the window from
/// just outside each edge that lies beyond a stable state.
[[nodiscard]] std::vector<fde::Trajectory> landscape_trajectories(const models::RationalModel& model,
                                                                  fde::MemoryOrder order,
                                                                  const models::EquilibriumSet& eq,
                                                                  const LandscapeSetup& setup);

/// landscape_trajectories followed by reconstruct_potential anchored at X_U.
[[nodiscard]] LandscapeProfile model_landscape(const models::RationalModel& model, fde::MemoryOrder order,
                                               const LandscapeSetup& setup);

/// Writes "state,V" CSV with '#' metadata lines.
void write_profile_csv(const LandscapeProfile& profile, const std::string& path, const std::string& model_id,
                       const std::string& schedule_hash);

}  // namespace fracland::landscape
