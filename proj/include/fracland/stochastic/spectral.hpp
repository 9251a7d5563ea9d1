#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fracland/fde/grid.hpp"

namespace fracland::stochastic {

/// PSD convention: S(omega) = int R(tau) exp(-i omega tau) dtau, so white forcing
/// sigma xi(t) has level sigma^2 and Var = (1/2pi) int S d omega over all omega.
/// Values are reported for 0 <= f <= 1/(2h).
struct PsdEstimate {
  std::vector<double> f;      ///< cycles per time unit
  std::vector<double> omega;  ///< 2 pi f
  std::vector<double> S;
  std::size_t segment = 0;
  std::size_t segments_used = 0;
};

/// Largest power of two <= n / 4, capped at 65536.
[[nodiscard]] std::size_t default_segment(std::size_t n);

/// Welch estimate with a Hann window and mean removal per segment.
/// segment 0 picks default_segment(x.size()). Throws SizingError when x is shorter than a segment.
[[nodiscard]] PsdEstimate welch_psd(std::span<const double> x, double h, std::size_t segment = 0,
                                    double overlap = 0.75);

/// sigma^2 / (lambda^2 + 2 lambda omega^alpha cos(pi alpha / 2) + omega^(2 alpha)).
[[nodiscard]] double theoretical_psd(fde::MemoryOrder order, double lambda, double sigma, double omega);

/// theoretical_psd fitted to a Welch estimate.
struct FouSpectrumFit {
  double alpha = 1.0;
  double lambda = 1.0;
  double sigma = 1.0;
  double rms_log_error = 0.0;
  std::size_t bands = 0;
  [[nodiscard]] double plateau() const { return sigma * sigma / (lambda * lambda); }
  /// Asymptotic log-log tail slope -2 alpha.
  [[nodiscard]] double tail_slope() const { return -2.0 * alpha; }
};

/// Fits (alpha, lambda, sigma) in log S over 0 < omega <= omega_max after averaging
/// the estimate into `per_decade` log-spaced bands, so that every decade weighs the same.
[[nodiscard]] FouSpectrumFit fit_fou_spectrum(const PsdEstimate& psd, double omega_max, std::size_t per_decade = 10);

/// Least-squares slope of log S against log omega over omega in [lo, hi].
[[nodiscard]] double loglog_slope(std::span<const double> omega, std::span<const double> S, double lo, double hi);

/// Biased, normalized autocorrelation rho_0..rho_max_lag by FFT.
[[nodiscard]] std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

struct CorrelationStats {
  std::vector<double> acf;
  double tau_int = 0.0;
};

/// ACF to max_lag and tau_int(W) = h (1 + 2 sum_{k=1}^{floor(W/h)} rho_k).
/// Throws SizingError when W/h reaches the series length.
[[nodiscard]] CorrelationStats correlation_stats(std::span<const double> x, double h, std::size_t max_lag,
                                                 double window);

/// Means of consecutive non-overlapping blocks of m samples; a partial tail is dropped.
[[nodiscard]] std::vector<double> block_means(std::span<const double> x, std::size_t m);

/// Sample variance of the block means for each m. Needs x.size() >= 10 max(m).
[[nodiscard]] std::vector<double> block_variance(std::span<const double> x, std::span<const std::size_t> ms);

/// gamma_0 / m [1 + 2 sum_{k<m} (1 - k/m) rho_k] from a given ACF.
[[nodiscard]] double block_variance_from_acf(double gamma0, std::span<const double> rho, std::size_t m);

}  // namespace fracland::stochastic
