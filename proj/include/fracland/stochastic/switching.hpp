#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fracland::stochastic {

struct CommitRule {
  double x_core = 0.9;
  double tau_hold = 0.2;
  /// Number of samples after the entry that must stay in the core.
  [[nodiscard]] std::size_t hold_steps(double h) const;
};

/// Alternating committed core entries. The first entry only fixes the starting
/// basin; every later one is a transition. Dwells are differences between
/// consecutive transitions, so the censored leading and trailing runs are dropped.
struct DwellRecord {
  std::vector<double> entry_times;
  std::vector<int> entry_signs;
  std::vector<double> dwells;
  [[nodiscard]] std::size_t transitions() const { return entry_times.empty() ? 0 : entry_times.size() - 1; }
};

/// Scans core labels l in {-1, 0, +1} (|x| >= x_core) of a series sampled at h from t0.
[[nodiscard]] DwellRecord detect_committed(std::span<const double> x, double h, const CommitRule& rule = {},
                                           double t0 = 0.0);

/// Sign changes of x (zeros skipped).
[[nodiscard]] std::size_t zero_crossings(std::span<const double> x);

struct DwellSummary {
  std::size_t count = 0;
  double median = 0.0;
  double mean = 0.0;
};

[[nodiscard]] DwellSummary dwell_summary(std::span<const double> dwells);

/// Empirical survival S_n(t) = #{T_i > t} / n; 1 for an empty sample.
[[nodiscard]] double survival(std::span<const double> dwells, double t);

/// S_n on a grid of times.
[[nodiscard]] std::vector<double> survival_curve(std::span<const double> dwells, std::span<const double> t);

/// Hazard f_n / S_n with a Gaussian kernel density reflected at t = 0.
/// bandwidth <= 0 picks Silverman's rule. Needs at least 10 dwells.
[[nodiscard]] std::vector<double> hazard(std::span<const double> dwells, std::span<const double> t,
                                         double bandwidth = 0.0);

[[nodiscard]] double silverman_bandwidth(std::span<const double> sample);

}  // namespace fracland::stochastic
