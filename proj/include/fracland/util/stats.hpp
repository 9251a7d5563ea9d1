#pragma once

#include <span>
#include <vector>

namespace fracland::util {

/// Ranks starting at 1; ties share their average rank.
[[nodiscard]] std::vector<double> ranks(std::span<const double> v);

/// Pearson correlation; NaN when either input is constant.
[[nodiscard]] double pearson(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with average ranks for ties.
[[nodiscard]] double spearman(std::span<const double> a, std::span<const double> b);

[[nodiscard]] double mean(std::span<const double> v);

/// Sample variance with divisor n - 1.
[[nodiscard]] double sample_variance(std::span<const double> v);

/// Linear interpolated quantile, q in [0, 1].
[[nodiscard]] double quantile(std::vector<double> v, double q);

}  // namespace fracland::util
