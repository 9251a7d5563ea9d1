#include "fracland/fde/mittag_leffler.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "fracland/errors.hpp"

namespace fracland::fde {
namespace {

constexpr long double kSeriesTermLimit = 1e7L;

long double log_abs_term(double alpha, double beta, double log_abs_z, int k) {
  return static_cast<long double>(k) * log_abs_z - std::lgammal(static_cast<long double>(alpha) * k + beta);
}

/// Largest |z^k / Gamma(alpha k + beta)| over k, as a log.
long double log_peak_term(double alpha, double beta, double z) {
  const double log_abs_z = std::log(std::abs(z));
  long double best = log_abs_term(alpha, beta, log_abs_z, 0);
  for (int k = 1; k < kMittagLefflerMaxTerms; ++k) {
    const long double v = log_abs_term(alpha, beta, log_abs_z, k);
    if (v < best) break;
    best = v;
  }
  return best;
}

double series(double alpha, double beta, double z) {
  const long double zl = z;
  const double log_abs_z = std::log(std::abs(z));
  long double sum = 1.0L / std::tgammal(static_cast<long double>(beta));
  long double prev_mag = std::abs(sum);
  for (int k = 1; k < kMittagLefflerMaxTerms; ++k) {
    const long double mag = std::exp(log_abs_term(alpha, beta, log_abs_z, k));
    const long double term = (zl < 0 && (k % 2 == 1)) ? -mag : mag;
    sum += term;
    const bool decreasing = mag < prev_mag;
    if (decreasing && mag <= 1e-19L * std::max(1.0L, std::abs(sum))) {
      return static_cast<double>(sum);
    }
    prev_mag = mag;
  }
  throw AccuracyError("mittag_leffler: series did not converge within max terms",
                      static_cast<double>(sum));
}

double closed_form_alpha_one(int n, double z) {
  // E_{1,n}(z) = z^(1-n) (e^z - sum_{k<n-1} z^k/k!)
  if (n == 1) return std::exp(z);
  if (n == 2) return std::expm1(z) / z;
  double partial = 0.0;
  double term = 1.0;
  for (int k = 0; k <= n - 2; ++k) {
    partial += term;
    term *= z / (k + 1);
  }
  return (std::exp(z) - partial) / std::pow(z, n - 1);
}

/// Real integral representation for z < 0 and alpha < 1.
double integral_negative(double alpha, double beta, double z) {
  using std::numbers::pi;
  const double s1 = std::sin(pi * (1.0 - beta));
  const double s2 = std::sin(pi * (1.0 - beta + alpha));
  const double ca = std::cos(alpha * pi);
  const double e_beta = (1.0 - beta) / alpha;
  auto kernel = [&](double chi) {
    if (chi <= 0.0) {
      if (e_beta > 0.0) return 0.0;
      if (e_beta == 0.0) return (-z * s2) / (z * z) / (alpha * pi);
    }
    const double num = chi * s1 - z * s2;
    const double den = chi * chi - 2.0 * chi * z * ca + z * z;
    return std::pow(chi, e_beta) * std::exp(-std::pow(chi, 1.0 / alpha)) * num / den / (alpha * pi);
  };
  boost::math::quadrature::exp_sinh<double> tail;
  if (beta < 1.0 + alpha) {
    return tail.integrate(kernel, 0.0, std::numeric_limits<double>::infinity());
  }
  constexpr double eps = 1.0;
  auto arc = [&](double phi) {
    const double omega = std::pow(eps, 1.0 / alpha) * std::sin(phi / alpha) + phi * (1.0 + e_beta);
    const std::complex<double> num(std::cos(omega), std::sin(omega));
    const std::complex<double> den = eps * std::polar(1.0, phi) - z;
    const double scale = std::pow(eps, 1.0 + e_beta) *
                         std::exp(std::pow(eps, 1.0 / alpha) * std::cos(phi / alpha)) / (2.0 * alpha * pi);
    return scale * (num / den).real();
  };
  const double part_tail = tail.integrate(kernel, eps, std::numeric_limits<double>::infinity());
  const double part_arc =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(arc, -alpha * pi, alpha * pi, 15, 1e-14);
  return part_tail + part_arc;
}

}  // namespace

double mittag_leffler(double alpha, double beta, double z) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw DomainError("mittag_leffler: alpha and beta must be positive");
  }
  if (!std::isfinite(z)) throw DomainError("mittag_leffler: z must be finite");
  if (z == 0.0) return 1.0 / std::tgamma(beta);
  if (z > 0.0 && std::pow(z, 1.0 / alpha) > 700.0) {
    throw AccuracyError("mittag_leffler: z beyond overflow guard", HUGE_VAL);
  }
  if (z > 0.0) return series(alpha, beta, z);

  const long double peak = std::exp(log_peak_term(alpha, beta, z));
  if (peak <= kSeriesTermLimit) return series(alpha, beta, z);
  if (alpha == 1.0 && beta == std::floor(beta) && beta <= 20.0) {
    return closed_form_alpha_one(static_cast<int>(beta), z);
  }
  if (alpha < 1.0) return integral_negative(alpha, beta, z);
  const double partial = series(alpha, beta, z);
  throw AccuracyError("mittag_leffler: cancellation too severe for series at z=" + std::to_string(z), partial);
}

}  // namespace fracland::fde
