#pragma once

namespace fracland::fde {

/// Two-parameter Mittag-Leffler function E_{alpha,beta}(z) for real z.
///
/// Evaluation strategy:
///  - power series in long double with a term-ratio stop, used whenever the
///    largest term stays below 1e7 (cancellation error under ~1e-11);
///  - for negative z beyond that, alpha < 1: the real integral representation
///    of Gorenflo, Loutchko and Luchko, integrated with double-exponential
///    quadrature;
///  - alpha == 1 and integer beta: closed form through exp.
///
/// Overflow guard: z > 0 with z^(1/alpha) > 700 throws AccuracyError, since the
/// result exceeds the double range.
/// The series stops after kMaxTerms terms; hitting the cap throws
/// AccuracyError carrying the partial sum.
///
/// Absolute accuracy is better than 1e-10 for |z| <= 30.
[[nodiscard]] double mittag_leffler(double alpha, double beta, double z);

/// E_alpha(z) = E_{alpha,1}(z).
[[nodiscard]] inline double mittag_leffler(double alpha, double z) {
  return mittag_leffler(alpha, 1.0, z);
}

inline constexpr int kMittagLefflerMaxTerms = 2000;

}  // namespace fracland::fde
