#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "fracland/fde/grid.hpp"

namespace fracland::fde {

enum class HistoryMethod {
  kDirect,  ///< plain O(N^2) sum over all past nodes
  kFft,     ///< same sum, evaluated by blocked FFT convolution in O(N log^2 N)
};

enum class CorrectorMethod {
  kFixedPoint,  ///< `corrector_iters` substitutions starting from the predictor
  kNewton,      ///< corrector equation solved to round-off; stable for stiff decay
};

struct SolverOptions {
  int corrector_iters = 3;
  CorrectorMethod corrector = CorrectorMethod::kNewton;
  HistoryMethod history = HistoryMethod::kDirect;
  /// Keep only the last `window` nodes in the history sum; 0 keeps all. Direct method only.
  std::size_t window = 0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  double upper_bound = std::numeric_limits<double>::infinity();
};

/// Power-law product-integration weights for kernel (t - tau)^(alpha-1) / Gamma(alpha).
class HistoryWeights {
 public:
  HistoryWeights(double alpha, double h, std::size_t n_max);

  /// Rectangle weight b_k = (k+1)^alpha - k^alpha.
  [[nodiscard]] double rect(std::size_t k) const { return b_[k]; }
  /// Trapezoid interior weight for lag d >= 1.
  [[nodiscard]] double trap(std::size_t d) const { return a_[d]; }
  /// Trapezoid weight of node 0 when the new node is n + 1.
  [[nodiscard]] double trap_first(std::size_t n) const;
  /// h^alpha / Gamma(alpha + 1).
  [[nodiscard]] double predictor_scale() const noexcept { return cp_; }
  /// h^alpha / Gamma(alpha + 2).
  [[nodiscard]] double corrector_scale() const noexcept { return cc_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
  double cp_;
  double cc_;
  std::vector<double> b_;
  std::vector<double> a_;
};

/// Drift at grid node n for state x.
using NodeDrift = std::function<double(std::size_t n, double x)>;

/// Additive or state-dependent white forcing: the forcing on [t_n, t_{n+1}) is
/// amplitude(x_n) * eta[n] / sqrt(h), evaluated at the left end point.
struct NoiseDrive {
  std::span<const double> eta;
  std::function<double(double)> amplitude;
};

/// Return true to stop the integration after node n.
using StopRule = std::function<bool(std::size_t n, double x)>;

struct VolterraResult {
  std::vector<double> x;  ///< states at nodes 0..last
  bool stopped_early = false;
};

/// Predictor-corrector solution of
///   x(t) = x0 + 1/Gamma(alpha) int_0^t (t - s)^(alpha-1) [F(s, x(s)) + noise(s)] ds
/// on the given grid. At alpha = 1 the history reduces to running sums.
/// Throws DivergenceError when the state leaves [lower_bound, upper_bound],
/// becomes non-finite, or the drift raises DomainError.
[[nodiscard]] VolterraResult integrate_volterra(const NodeDrift& drift, MemoryOrder order, double x0,
                                                const SolverGrid& grid, const SolverOptions& options = {},
                                                const NoiseDrive* noise = nullptr,
                                                const StopRule& stop = {});

}  // namespace fracland::fde
