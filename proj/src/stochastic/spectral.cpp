#include "fracland/stochastic/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "fracland/errors.hpp"
#include "fracland/util/fft.hpp"
#include "fracland/util/lsq.hpp"
#include "fracland/util/stats.hpp"

namespace fracland::stochastic {

std::size_t default_segment(std::size_t n) {
  std::size_t s = 1;
  while (s * 2 <= n / 4 && s * 2 <= 65536) s *= 2;
  return s;
}

PsdEstimate welch_psd(std::span<const double> x, double h, std::size_t segment, double overlap) {
  if (!(h > 0.0)) throw DomainError("welch_psd: h must be positive");
  if (overlap < 0.0 || overlap >= 1.0) throw DomainError("welch_psd: overlap must be in [0, 1)");
  const std::size_t L = segment > 0 ? segment : default_segment(x.size());
  if (L < 8 || x.size() < L) throw SizingError("welch_psd: series shorter than one segment");
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(L * (1.0 - overlap))));

  std::vector<double> w(L);
  double w2 = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L));
    w2 += w[i] * w[i];
  }
  util::RealFft fft(L);
  std::vector<double> buf(L);
  std::vector<std::complex<double>> spec(fft.spectrum_size());
  PsdEstimate out;
  out.segment = L;
  out.S.assign(fft.spectrum_size(), 0.0);
  for (std::size_t start = 0; start + L <= x.size(); start += step) {
    double m = 0.0;
    for (std::size_t i = 0; i < L; ++i) m += x[start + i];
    m /= static_cast<double>(L);
    for (std::size_t i = 0; i < L; ++i) buf[i] = (x[start + i] - m) * w[i];
    fft.forward(buf.data(), spec.data());
    for (std::size_t k = 0; k < spec.size(); ++k) out.S[k] += std::norm(spec[k]);
    ++out.segments_used;
  }
  const double scale = h / (w2 * static_cast<double>(out.segments_used));
  out.f.resize(out.S.size());
  out.omega.resize(out.S.size());
  for (std::size_t k = 0; k < out.S.size(); ++k) {
    out.S[k] *= scale;
    out.f[k] = static_cast<double>(k) / (static_cast<double>(L) * h);
    out.omega[k] = 2.0 * std::numbers::pi * out.f[k];
  }
  return out;
}

double theoretical_psd(fde::MemoryOrder order, double lambda, double sigma, double omega) {
  if (!(lambda > 0.0)) throw DomainError("theoretical_psd: lambda must be positive");
  if (!(omega >= 0.0)) throw DomainError("theoretical_psd: omega must be >= 0");
  const double a = order.alpha();
  const double wa = std::pow(omega, a);
  return sigma * sigma / (lambda * lambda + 2.0 * lambda * wa * std::cos(std::numbers::pi * a / 2.0) + wa * wa);
}

FouSpectrumFit fit_fou_spectrum(const PsdEstimate& psd, double omega_max, std::size_t per_decade) {
  if (per_decade == 0) throw DomainError("fit_fou_spectrum: per_decade must be positive");
  if (psd.omega.size() < 3) throw SizingError("fit_fou_spectrum: estimate too short");
  const double w0 = psd.omega[1];
  std::vector<double> bw, bs;
  std::size_t k = 1;
  while (k < psd.omega.size() && psd.omega[k] <= omega_max) {
    const double edge = psd.omega[k] * std::pow(10.0, 1.0 / static_cast<double>(per_decade));
    double lw = 0.0, ls = 0.0;
    std::size_t c = 0;
    for (; k < psd.omega.size() && psd.omega[k] <= omega_max && (c == 0 || psd.omega[k] < edge); ++k, ++c) {
      lw += std::log(psd.omega[k]);
      ls += psd.S[k];
    }
    bw.push_back(std::exp(lw / static_cast<double>(c)));
    bs.push_back(std::log(ls / static_cast<double>(c)));
  }
  if (bw.size() < 4) throw SizingError("fit_fou_spectrum: fewer than four bands below omega_max");

  auto residuals = [&](const Eigen::VectorXd& p) {
    const fde::MemoryOrder order(p[0]);
    const double lambda = std::exp(p[1]);
    const double sigma = std::exp(p[2]);
    Eigen::VectorXd r(static_cast<Eigen::Index>(bw.size()));
    for (std::size_t i = 0; i < bw.size(); ++i) {
      r[static_cast<Eigen::Index>(i)] = bs[i] - std::log(theoretical_psd(order, lambda, sigma, bw[i]));
    }
    return r;
  };
  // start from the low-frequency level and the corner at omega ~ 1
  const double level = std::exp(bs.front());
  Eigen::VectorXd x0(3), lo(3), hi(3);
  x0 << 0.9, 0.0, 0.5 * std::log(level);
  lo << 0.05, std::log(w0) - 5.0, -50.0;
  hi << 1.0, std::log(omega_max) + 5.0, 50.0;
  const auto fit = util::least_squares(residuals, x0, lo, hi);
  FouSpectrumFit out;
  out.alpha = fit.x[0];
  out.lambda = std::exp(fit.x[1]);
  out.sigma = std::exp(fit.x[2]);
  out.bands = bw.size();
  out.rms_log_error = std::sqrt(2.0 * fit.cost / static_cast<double>(bw.size()));
  return out;
}

double loglog_slope(std::span<const double> omega, std::span<const double> S, double lo, double hi) {
  if (omega.size() != S.size()) throw DomainError("loglog_slope: size mismatch");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    if (omega[i] < lo || omega[i] > hi || !(S[i] > 0.0)) continue;
    const double lx = std::log(omega[i]);
    const double ly = std::log(S[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw SizingError("loglog_slope: fewer than two points in the band");
  const double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  if (n < 2) throw SizingError("autocorrelation: need at least two samples");
  if (max_lag >= n) throw SizingError("autocorrelation: max_lag must be below the series length");
  std::size_t L = 1;
  while (L < 2 * n) L *= 2;
  const double m = util::mean(x);
  std::vector<double> buf(L, 0.0);
  for (std::size_t i = 0; i < n; ++i) buf[i] = x[i] - m;
  util::RealFft fft(L);
  std::vector<std::complex<double>> spec(fft.spectrum_size());
  fft.forward(buf.data(), spec.data());
  for (auto& c : spec) c = std::norm(c);
  fft.inverse(spec.data(), buf.data());
  std::vector<double> rho(max_lag + 1);
  if (!(buf[0] > 0.0)) throw MetricError("autocorrelation: constant series");
  for (std::size_t k = 0; k <= max_lag; ++k) rho[k] = buf[k] / buf[0];
  return rho;
}

CorrelationStats correlation_stats(std::span<const double> x, double h, std::size_t max_lag, double window) {
  const auto kw = static_cast<std::size_t>(std::floor(window / h + 1e-9));
  if (kw >= x.size()) throw SizingError("correlation_stats: window exceeds the series span");
  CorrelationStats out;
  out.acf = autocorrelation(x, std::max(max_lag, kw));
  double s = 0.0;
  for (std::size_t k = 1; k <= kw; ++k) s += out.acf[k];
  out.tau_int = h * (1.0 + 2.0 * s);
  out.acf.resize(max_lag + 1);
  return out;
}

std::vector<double> block_means(std::span<const double> x, std::size_t m) {
  if (m == 0) throw DomainError("block_means: m must be positive");
  std::vector<double> out;
  out.reserve(x.size() / m);
  for (std::size_t j = 0; j + m <= x.size(); j += m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += x[j + i];
    out.push_back(s / static_cast<double>(m));
  }
  return out;
}

std::vector<double> block_variance(std::span<const double> x, std::span<const std::size_t> ms) {
  std::vector<double> out;
  for (std::size_t m : ms) {
    if (m == 0 || x.size() < 10 * m) throw SizingError("block_variance: need at least 10 blocks of size m");
    out.push_back(util::sample_variance(block_means(x, m)));
  }
  return out;
}

double block_variance_from_acf(double gamma0, std::span<const double> rho, std::size_t m) {
  if (m == 0 || rho.size() < m) throw SizingError("block_variance_from_acf: ACF shorter than m");
  double s = 1.0;
  for (std::size_t k = 1; k < m; ++k) s += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(m)) * rho[k];
  return gamma0 / static_cast<double>(m) * s;
}

}  // namespace fracland::stochastic
