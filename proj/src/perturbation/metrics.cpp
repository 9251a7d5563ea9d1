#include "fracland/perturbation/metrics.hpp"

#include <cmath>

namespace fracland::perturbation {

double recovery_threshold(const models::EquilibriumSet& eq) {
  return (eq.upper_stable() - eq.unstable()) * 1e-4;
}

double recovery_rate(double x0, double xp, double xn, double t_p, double t_n) {
  if (!(t_n > t_p)) throw DomainError("recovery_rate: need t_n > t_p");
  const double dp = std::abs(x0 - xp);
  const double dn = std::abs(x0 - xn);
  if (dp + dn == 0.0) throw MetricError("recovery_rate: state never left X0");
  return ((dp - dn) / (dp + dn)) / (t_n - t_p);
}

namespace {

/// End of the single active offset window.
double pulse_end(const models::ParameterSchedule& s) {
  for (const auto& seg : s.segments()) {
    const bool active = (seg.shape == models::SegmentShape::kOffset && seg.v0 != 0.0) ||
                        (seg.shape == models::SegmentShape::kConstant && seg.v0 != s.baseline());
    if (active) return seg.t_end;
  }
  throw ConfigError("pulse schedule has no active window");
}

}  // namespace

ResilienceResult resilience_index(const models::RationalModel& model, fde::MemoryOrder order,
                                  const models::ParameterSchedule& pulse, const fde::SolverGrid& grid,
                                  const fde::SolverOptions& solver) {
  const auto base = model.with_parameter(pulse.parameter(), pulse.baseline());
  const auto eq = models::equilibria(base);
  ResilienceResult r;
  r.x0 = eq.upper_stable();
  r.threshold = recovery_threshold(eq);
  const std::size_t np = grid.node(pulse_end(pulse));
  if (np >= grid.n_steps()) throw ConfigError("resilience: pulse must end before the grid does");
  r.t_p = grid.time(np);
  const double xs1 = eq.lower_stable();
  const double xu = eq.unstable();
  fde::StopRule stop = [&](std::size_t n, double x) {
    if (n <= np) return false;
    return std::abs(x - r.x0) <= r.threshold || std::abs(x - xs1) <= r.threshold;
  };
  const auto tr = fde::solve_caputo(base, pulse, order, r.x0, grid, solver, stop);
  r.xp = tr.x[np];
  const std::size_t last = tr.x.size() - 1;
  r.xn = tr.x[last];
  r.t_n = grid.time(last);
  r.recovered = last > np && std::abs(r.xn - r.x0) <= r.threshold;
  r.transitioned = !r.recovered && r.xn < xu;
  if (r.recovered) r.value = recovery_rate(r.x0, r.xp, r.xn, r.t_p, r.t_n);
  return r;
}

double PulseTemplate::t_end() const {
  const double tail = horizon > 0.0 ? horizon : 10.0 * duration + 500.0;
  return t_on + duration + tail;
}

models::ParameterSchedule PulseTemplate::schedule(double baseline, double magnitude) const {
  return models::ParameterSchedule::pulse(parameter, baseline, direction * magnitude, t_on, t_on + duration, 0.0,
                                          t_end());
}

ProbeOutcome classify_pulse(const models::RationalModel& model, fde::MemoryOrder order, const PulseTemplate& pulse,
                            double magnitude, const fde::SolverOptions& solver) {
  const auto eq = models::equilibria(model);
  const double thr = recovery_threshold(eq);
  const double xs1 = eq.lower_stable();
  const double xs2 = eq.upper_stable();
  fde::SolverGrid grid(0.0, pulse.t_end(), pulse.h);
  const std::size_t np = grid.node(pulse.t_on + pulse.duration);
  fde::StopRule stop = [&](std::size_t n, double x) {
    return n > np && (std::abs(x - xs2) <= thr || std::abs(x - xs1) <= thr);
  };
  try {
    const auto tr = fde::solve_caputo(model, pulse.schedule(model.parameter(pulse.parameter), magnitude), order, xs2,
                                      grid, solver, stop);
    const double x = tr.x.back();
    if (std::abs(x - xs2) <= thr) return ProbeOutcome::kReturned;
    if (std::abs(x - xs1) <= thr) return ProbeOutcome::kTransitioned;
    // power-law relaxation under memory may miss both bands; use the basin at the horizon
    const double xu = eq.unstable();
    if (std::abs(x - xu) > thr) return x > xu ? ProbeOutcome::kReturned : ProbeOutcome::kTransitioned;
  } catch (const DivergenceError&) {
  }
  return ProbeOutcome::kUnresolved;
}

ResistanceResult resistance_search(const models::RationalModel& model, fde::MemoryOrder order,
                                   const PulseTemplate& pulse, double lo, double hi, double tolerance,
                                   const fde::SolverOptions& solver) {
  if (!(hi > lo) || lo < 0.0) throw DomainError("resistance_search: need 0 <= lo < hi");
  ResistanceResult res;
  auto probe = [&](double p) {
    const auto o = classify_pulse(model, order, pulse, p, solver);
    res.probes.push_back({p, o});
    if (o == ProbeOutcome::kUnresolved) {
      throw BracketAnomaly("resistance_search: unresolved outcome at P = " + std::to_string(p), res.probes);
    }
    return o;
  };
  if (probe(lo) != ProbeOutcome::kReturned) {
    throw BracketAnomaly("resistance_search: lower bracket edge does not return", res.probes);
  }
  if (probe(hi) != ProbeOutcome::kTransitioned) {
    throw BracketAnomaly("resistance_search: upper bracket edge does not transition", res.probes);
  }
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid) == ProbeOutcome::kReturned) lo = mid;
    else hi = mid;
  }
  res.lower = lo;
  res.upper = hi;
  res.p_star = 0.5 * (lo + hi);
  return res;
}

double relative_effect(double with_memory, double without_memory) {
  if (with_memory < 0.0 || without_memory < 0.0) throw MetricError("relative_effect: negative input");
  if (with_memory + without_memory == 0.0) throw MetricError("relative_effect: undefined for two zeros");
  return (with_memory - without_memory) / (with_memory + without_memory);
}

}  // namespace fracland::perturbation
