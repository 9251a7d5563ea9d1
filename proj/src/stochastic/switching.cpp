#include "fracland/stochastic/switching.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fracland/errors.hpp"
#include "fracland/util/stats.hpp"

namespace fracland::stochastic {

std::size_t CommitRule::hold_steps(double h) const {
  if (!(x_core > 0.0)) throw DomainError("commit rule: x_core must be positive");
  if (!(h > 0.0)) throw DomainError("commit rule: h must be positive");
  const auto n = static_cast<std::size_t>(std::llround(tau_hold / h));
  if (n < 1) throw DomainError("commit rule: tau_hold shorter than one sample");
  return n;
}

DwellRecord detect_committed(std::span<const double> x, double h, const CommitRule& rule, double t0) {
  const std::size_t hold = rule.hold_steps(h);
  auto label = [&](double v) { return v >= rule.x_core ? 1 : (v <= -rule.x_core ? -1 : 0); };
  DwellRecord rec;
  // run length of the current core label
  std::size_t run = 0;
  int run_sign = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int l = label(x[i]);
    if (l != 0 && l == run_sign) {
      ++run;
    } else {
      run_sign = l;
      run = l != 0 ? 1 : 0;
    }
    // entry at i - hold stays in the core for hold more samples
    if (run == hold + 1) {
      const int last = rec.entry_signs.empty() ? 0 : rec.entry_signs.back();
      if (run_sign != last) {
        rec.entry_times.push_back(t0 + static_cast<double>(i - hold) * h);
        rec.entry_signs.push_back(run_sign);
      }
    }
  }
  for (std::size_t i = 2; i < rec.entry_times.size(); ++i) {
    rec.dwells.push_back(rec.entry_times[i] - rec.entry_times[i - 1]);
  }
  return rec;
}

std::size_t zero_crossings(std::span<const double> x) {
  std::size_t n = 0;
  int last = 0;
  for (double v : x) {
    const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++n;
    last = s;
  }
  return n;
}

DwellSummary dwell_summary(std::span<const double> dwells) {
  DwellSummary s;
  s.count = dwells.size();
  if (dwells.empty()) return s;
  s.median = util::quantile({dwells.begin(), dwells.end()}, 0.5);
  s.mean = util::mean(dwells);
  return s;
}

double survival(std::span<const double> dwells, double t) {
  if (dwells.empty()) return 1.0;
  const auto n = std::count_if(dwells.begin(), dwells.end(), [t](double d) { return d > t; });
  return static_cast<double>(n) / static_cast<double>(dwells.size());
}

std::vector<double> survival_curve(std::span<const double> dwells, std::span<const double> t) {
  std::vector<double> out;
  out.reserve(t.size());
  for (double ti : t) out.push_back(survival(dwells, ti));
  return out;
}

double silverman_bandwidth(std::span<const double> sample) {
  if (sample.size() < 2) throw DomainError("bandwidth: need at least two values");
  const double sd = std::sqrt(util::sample_variance(sample));
  std::vector<double> v(sample.begin(), sample.end());
  const double iqr = util::quantile(v, 0.75) - util::quantile(v, 0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0.0)) spread = 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(sample.size()), -0.2);
}

std::vector<double> hazard(std::span<const double> dwells, std::span<const double> t, double bandwidth) {
  if (dwells.size() < 10) throw SizingError("hazard: need at least 10 dwell times");
  const double bw = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(dwells);
  const double norm = 1.0 / (static_cast<double>(dwells.size()) * bw * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> out;
  out.reserve(t.size());
  for (double ti : t) {
    double f = 0.0;
    for (double d : dwells) {
      const double u = (ti - d) / bw;
      const double v = (ti + d) / bw;
      f += std::exp(-0.5 * u * u) + std::exp(-0.5 * v * v);
    }
    f *= norm;
    const double s = survival(dwells, ti);
    out.push_back(s > 0.0 ? f / s : std::nan(""));
  }
  return out;
}

}  // namespace fracland::stochastic
