#include "fracland/landscape/landscape.hpp"

#include <algorithm>
#include <math.h>  // pchip.hpp in Boost 1.74 calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>
#include <cmath>
#include <fstream>

#include "fracland/errors.hpp"
#include "fracland/util/csv.hpp"

namespace fracland::landscape {

std::size_t landscape_grid_points(double x_lo, double x_hi, double step) {
  if (!(x_hi > x_lo) || !(step > 0.0)) throw DomainError("landscape: need x_hi > x_lo and step > 0");
  const auto n = static_cast<std::size_t>(std::llround(2.0 * (x_hi - x_lo) / step));
  return std::max<std::size_t>(n, 5);
}

std::vector<VelocitySample> velocity_samples(const fde::Trajectory& tr) {
  std::vector<VelocitySample> out;
  const auto& x = tr.x;
  if (x.size() < 5) return out;
  const double inv = 1.0 / (12.0 * tr.h);
  out.reserve(x.size() - 4);
  for (std::size_t n = 2; n + 2 < x.size(); ++n) {
    out.push_back({x[n], (x[n - 2] - 8.0 * x[n - 1] + 8.0 * x[n + 1] - x[n + 2]) * inv});
  }
  return out;
}

std::vector<double> cumulative_simpson(const std::vector<double>& f, double dx) {
  std::vector<double> out(f.size(), 0.0);
  if (f.size() < 2) return out;
  if (f.size() == 2) {
    out[1] = 0.5 * dx * (f[0] + f[1]);
    return out;
  }
  for (std::size_t i = 1; i < f.size(); ++i) {
    if (i % 2 == 0) {
      out[i] = out[i - 2] + dx / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
    } else if (i + 1 < f.size()) {
      out[i] = out[i - 1] + dx / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1]);
    } else {
      out[i] = out[i - 1] + 0.5 * dx * (f[i - 1] + f[i]);
    }
  }
  return out;
}

LandscapeProfile reconstruct_potential(const std::vector<fde::Trajectory>& trajectories, double x_lo, double x_hi,
                                       double anchor, double step, const ReconstructOptions& options) {
  const std::size_t n = landscape_grid_points(x_lo, x_hi, step);
  if (anchor < x_lo || anchor > x_hi) throw DomainError("landscape: anchor outside the window");
  if (trajectories.empty()) throw CoverageError("landscape: no trajectories");

  std::vector<VelocitySample> samples;
  for (const auto& tr : trajectories) {
    for (const auto& s : velocity_samples(tr)) {
      if (std::isfinite(s.x) && std::isfinite(s.v) && std::abs(s.v) >= options.min_speed) samples.push_back(s);
    }
  }
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.x < b.x; });

  std::vector<double> xs, vs;
  std::vector<int> counts;
  for (const auto& s : samples) {
    if (!xs.empty() && s.x - xs.back() <= 1e-12 * std::max(1.0, std::abs(s.x))) {
      // running mean of near-coincident states
      vs.back() += (s.v - vs.back()) / ++counts.back();
      continue;
    }
    xs.push_back(s.x);
    vs.push_back(s.v);
    counts.push_back(1);
  }

  const double spacing = (x_hi - x_lo) / static_cast<double>(n - 1);
  const double max_gap = options.max_gap > 0.0 ? options.max_gap : 0.02 * (x_hi - x_lo) + 2.0 * spacing;
  if (xs.size() < 4) throw CoverageError("landscape: too few usable samples");
  if (xs.front() > x_lo + max_gap) {
    throw CoverageError("landscape: samples start at " + std::to_string(xs.front()) + " above x_lo " +
                        std::to_string(x_lo));
  }
  if (xs.back() < x_hi - max_gap) {
    throw CoverageError("landscape: samples end at " + std::to_string(xs.back()) + " below x_hi " +
                        std::to_string(x_hi));
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (xs[i] < x_lo || xs[i - 1] > x_hi) continue;
    if (xs[i] - xs[i - 1] > max_gap) {
      throw CoverageError("landscape: gap in sampled states between " + std::to_string(xs[i - 1]) + " and " +
                          std::to_string(xs[i]));
    }
  }

  const double data_lo = xs.front();
  const double data_hi = xs.back();
  boost::math::interpolators::pchip<std::vector<double>> interp(std::move(xs), std::move(vs));

  LandscapeProfile prof;
  prof.spacing = spacing;
  prof.anchor = anchor;
  prof.alpha = trajectories.front().order.alpha();
  prof.x.resize(n);
  std::vector<double> force(n);
  for (std::size_t i = 0; i < n; ++i) {
    prof.x[i] = (i + 1 == n) ? x_hi : x_lo + spacing * static_cast<double>(i);
    force[i] = -interp(std::clamp(prof.x[i], data_lo, data_hi));
  }
  prof.V = cumulative_simpson(force, spacing);

  // zero level at the anchor by linear interpolation between nodes
  const auto k = std::min<std::size_t>(static_cast<std::size_t>((anchor - x_lo) / spacing), n - 2);
  const double w = (anchor - prof.x[k]) / spacing;
  const double v_anchor = (1.0 - w) * prof.V[k] + w * prof.V[k + 1];
  prof.side.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    prof.V[i] -= v_anchor;
    prof.side[i] = prof.x[i] < anchor ? -1 : 1;
  }
  return prof;
}

BasinMetrics basin_metrics(const LandscapeProfile& p) {
  const std::size_t n = p.x.size();
  std::size_t start = 0;
  while (start < n && p.x[start] < p.anchor) ++start;
  if (start >= n) throw MetricError("basin_metrics: no grid points right of the anchor");
  std::size_t imin = start;
  for (std::size_t i = start; i < n; ++i) {
    if (p.V[i] < p.V[imin]) imin = i;
  }
  if (imin < 2 || imin + 2 >= n) {
    throw MetricError("basin_metrics: minimum at the grid boundary, widen the landscape window");
  }
  BasinMetrics m;
  m.minimum = p.x[imin];
  const double* v = &p.V[imin];
  m.curvature = (-v[-2] + 16.0 * v[-1] - 30.0 * v[0] + 16.0 * v[1] - v[2]) / (12.0 * p.spacing * p.spacing);
  double top = p.V[imin];
  for (std::size_t i = start > 0 ? start - 1 : 0; i <= imin; ++i) top = std::max(top, p.V[i]);
  m.depth = top - p.V[imin];
  return m;
}

double apply_ensemble_context(std::vector<BasinMetrics>& batch) {
  if (batch.empty()) return 0.0;
  double cmax = 0.0, cmin = HUGE_VAL, dmax = -HUGE_VAL, dmin = HUGE_VAL;
  for (const auto& b : batch) {
    cmax = std::max(cmax, std::abs(b.curvature));
    cmin = std::min(cmin, std::abs(b.curvature));
    dmax = std::max(dmax, b.depth);
    dmin = std::min(dmin, b.depth);
  }
  const double ceiled = std::ceil(cmax);
  for (auto& b : batch) {
    b.flatness = ceiled - std::abs(b.curvature);
    const double nd = dmax > dmin ? (b.depth - dmin) / (dmax - dmin) : 0.0;
    const double nc = cmax > cmin ? (std::abs(b.curvature) - cmin) / (cmax - cmin) : 0.0;
    b.sharpness = 0.5 * (nd + nc);
  }
  return ceiled;
}

std::function<double(double)> analytic_potential(const models::RationalModel& model) {
  using models::ModelKind;
  if (model.kind() == ModelKind::kCubic) {
    const auto a = model.coefficients();
    return [a](double x) {
      return -(a[0] * x + a[1] * x * x / 2.0 + a[2] * x * x * x / 3.0 + a[3] * x * x * x * x / 4.0);
    };
  }
  if (model.kind() == ModelKind::kQuorum) {
    const auto q = model.quorum_params();
    const double d = models::quorum_degradation(q.rho);
    const double sk = std::sqrt(q.K);
    return [q, d, sk](double a) { return -(q.V * (a - sk * std::atan(a / sk)) + q.x0 * a - d * a * a / 2.0); };
  }
  throw CapabilityError("analytic_potential: no closed form for this model; use reconstruct_potential");
}

double landscape_step(const models::RationalModel& model, double x_lo, double x_hi, double h) {
  double fmax = 0.0;
  for (int i = 0; i <= 200; ++i) fmax = std::max(fmax, std::abs(model.drift(x_lo + (x_hi - x_lo) * i / 200.0)));
  const double limit = 0.005 * (x_hi - x_lo);
  int halvings = 0;
  while (h * fmax > limit && halvings < 10) {
    h *= 0.5;
    ++halvings;
  }
  return h;
}

LandscapeSetup default_setup(const models::EquilibriumSet& eq, double h, double t_end) {
  LandscapeSetup s;
  s.x_lo = eq.lower_stable();
  s.x_hi = eq.upper_stable() + 0.5 * (eq.upper_stable() - eq.unstable());
  s.h = h;
  s.t_end = t_end;
  return s;
}

std::vector<fde::Trajectory> landscape_trajectories(const models::RationalModel& model, fde::MemoryOrder order,
                                                    const models::EquilibriumSet& eq, const LandscapeSetup& setup) {
  if (!eq.bistable()) throw DomainError("landscape: model is not bistable");
  const double xs1 = eq.lower_stable(), xu = eq.unstable(), xs2 = eq.upper_stable();
  const double eps = setup.epsilon_fraction * (xs2 - xs1);
  const double margin = 0.01 * (setup.x_hi - setup.x_lo);
  // Outside starts must still be beyond the edge at the first node with a velocity
  // sample, so steep drifts push them further out.
  auto outside = [&](double edge, double dir) {
    const fde::SolverGrid probe(0.0, 3.0 * setup.h, setup.h);
    double d = margin;
    for (int k = 0; k < 40; ++k, d *= 1.5) {
      try {
        const auto tr = fde::solve_caputo(model, std::nullopt, order, edge + dir * d, probe, setup.solver);
        if (dir * (tr.x[2] - edge) >= 0.25 * margin) return edge + dir * d;
      } catch (const DivergenceError&) {
        break;
      }
    }
    throw CoverageError("landscape: no start outside the window edge " + std::to_string(edge) + " reaches back");
  };
  std::vector<double> starts{xu - eps, xu + eps};
  if (setup.x_hi > xs2 + margin) starts.push_back(outside(setup.x_hi, 1.0));
  if (setup.x_lo < xs1 - margin) starts.push_back(outside(setup.x_lo, -1.0));
  fde::SolverGrid grid(0.0, setup.t_end, setup.h);
  std::vector<fde::Trajectory> out;
  for (double x0 : starts) out.push_back(fde::solve_caputo(model, std::nullopt, order, x0, grid, setup.solver));
  return out;
}

LandscapeProfile model_landscape(const models::RationalModel& model, fde::MemoryOrder order,
                                 const LandscapeSetup& setup) {
  const auto eq = models::equilibria(model);
  const auto trs = landscape_trajectories(model, order, eq, setup);
  return reconstruct_potential(trs, setup.x_lo, setup.x_hi, eq.unstable(), setup.h);
}

void write_profile_csv(const LandscapeProfile& p, const std::string& path, const std::string& model_id,
                       const std::string& schedule_hash) {
  util::CsvWriter csv(path, {"state", "V"},
                      {"model=" + model_id, "alpha=" + util::format_number(p.alpha), "schedule=" + schedule_hash});
  for (std::size_t i = 0; i < p.x.size(); ++i) csv.row({p.x[i], p.V[i]});
}

}  // namespace fracland::landscape
