#include "fracland/stochastic/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "fracland/errors.hpp"
#include "fracland/util/stats.hpp"

namespace fracland::stochastic {

namespace {

/// -int_a^b F dx by composite Simpson.
double potential_difference(const models::RationalModel& m, double a, double b) {
  const int n = 2000;
  const double dx = (b - a) / n;
  double s = m.drift(a) + m.drift(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * m.drift(a + i * dx);
  return -s * dx / 3.0;
}

double stable_state(const models::EquilibriumSet& eq, bool from_upper) {
  return from_upper ? eq.upper_stable() : eq.lower_stable();
}

}  // namespace

double barrier_height(const models::RationalModel& model, bool from_upper) {
  const auto eq = models::equilibria(model);
  if (!eq.bistable()) throw DomainError("barrier_height: model is not bistable");
  return potential_difference(model, stable_state(eq, from_upper), eq.unstable());
}

double kramers_rate(const models::RationalModel& model, double sigma, bool from_upper) {
  if (!(sigma > 0.0)) throw DomainError("kramers_rate: sigma must be positive");
  const auto eq = models::equilibria(model);
  if (!eq.bistable()) throw DomainError("kramers_rate: model is not bistable");
  const double xs = stable_state(eq, from_upper);
  const double pref = std::sqrt(std::abs(model.drift_derivative(eq.unstable())) *
                                std::abs(model.drift_derivative(xs))) /
                      (2.0 * std::numbers::pi);
  return pref * std::exp(-barrier_height(model, from_upper) / (sigma * sigma));
}

DensityCheck stationary_density_check(std::span<const double> samples, fde::MemoryOrder order,
                                      const models::RationalModel& model, double sigma, std::size_t bins) {
  if (!order.memoryless()) {
    throw CapabilityError("stationary_density_check: no closed stationary density with memory");
  }
  if (!(sigma > 0.0)) throw DomainError("stationary_density_check: sigma must be positive");
  if (samples.size() < 2 || bins < 2) throw SizingError("stationary_density_check: too few samples or bins");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double span = sorted.back() - sorted.front();
  const double lo = sorted.front() - 0.5 * span;
  const double hi = sorted.back() + 0.5 * span;

  const std::size_t n = 8001;
  const double dx = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> xs(n), V(n, 0.0), p(n), cdf(n, 0.0);
  double f_prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = lo + dx * static_cast<double>(i);
    const double f = model.drift(xs[i]);
    if (i > 0) V[i] = V[i - 1] - 0.5 * dx * (f + f_prev);
    f_prev = f;
  }
  const double vmin = *std::min_element(V.begin(), V.end());
  for (std::size_t i = 0; i < n; ++i) p[i] = std::exp(-2.0 * (V[i] - vmin) / (sigma * sigma));
  for (std::size_t i = 1; i < n; ++i) cdf[i] = cdf[i - 1] + 0.5 * dx * (p[i] + p[i - 1]);
  const double z = cdf.back();

  DensityCheck out;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k < sorted.size() && sorted[k] <= xs[i]) ++k;
    const double emp = static_cast<double>(k) / static_cast<double>(sorted.size());
    out.distance = std::max(out.distance, std::abs(emp - cdf[i] / z));
  }

  const double w = span / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  for (double s : sorted) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((s - sorted.front()) / w));
    counts[b] += 1.0;
  }
  for (std::size_t b = 0; b < bins; ++b) {
    const double c = sorted.front() + (static_cast<double>(b) + 0.5) * w;
    out.x.push_back(c);
    out.empirical.push_back(counts[b] / (static_cast<double>(sorted.size()) * w));
    const auto i = std::min(n - 1, static_cast<std::size_t>(std::llround((c - lo) / dx)));
    out.theory.push_back(p[i] / z);
  }
  return out;
}

VarianceSplit total_variance_split(std::span<const double> x, std::span<const int> region) {
  if (x.size() != region.size() || x.empty()) throw DomainError("total_variance_split: size mismatch");
  const double n = static_cast<double>(x.size());
  const double m = util::mean(x);
  struct Acc {
    double n = 0.0, s = 0.0;
  };
  std::map<int, Acc> groups;
  VarianceSplit v;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto& g = groups[region[i]];
    g.n += 1.0;
    g.s += x[i];
    v.total += (x[i] - m) * (x[i] - m);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& g = groups[region[i]];
    const double gm = g.s / g.n;
    v.within += (x[i] - gm) * (x[i] - gm);
  }
  for (const auto& [key, g] : groups) {
    const double gm = g.s / g.n;
    v.between += g.n * (gm - m) * (gm - m);
  }
  v.total /= n;
  v.within /= n;
  v.between /= n;
  return v;
}

double skewness(std::span<const double> x) {
  const double m = util::mean(x);
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    m2 += (v - m) * (v - m);
    m3 += (v - m) * (v - m) * (v - m);
  }
  m2 /= static_cast<double>(x.size());
  m3 /= static_cast<double>(x.size());
  if (!(m2 > 0.0)) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

}  // namespace fracland::stochastic
