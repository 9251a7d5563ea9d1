#include "fracland/fitting/fitting.hpp"

#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include "json.hpp"

#include "fracland/errors.hpp"
#include "fracland/models/equilibria.hpp"
#include "fracland/util/csv.hpp"

namespace fracland::fitting {

namespace odeint = boost::numeric::odeint;

BistableWindow herbivory_window(double r, double K, double A) {
  return {r * A, r * (K + A) * (K + A) / (4.0 * K)};
}

std::size_t FitDataset::n_points() const {
  std::size_t n = 0;
  for (const auto& run : runs) n += run.x.size();
  return n;
}

std::vector<double> integrate_memory_free(double r, double K, double A, const std::vector<BSegment>& segments,
                                          double x0, double t0, const std::vector<double>& times,
                                          const OdeTolerance& tol) {
  using State = std::array<double, 1>;
  if (segments.empty()) throw DomainError("integrate_memory_free: no B segments");
  std::vector<double> out;
  out.reserve(times.size());
  State s{x0};
  double t_prev = t0;
  std::size_t k = 0;
  for (const auto& seg : segments) {
    if (!(seg.t_end > t_prev)) continue;
    const auto model = models::RationalModel::herbivory({r, K, A, seg.B});
    auto rhs = [&model](const State& x, State& dx, double) { dx[0] = model.drift(x[0]); };
    std::vector<double> ts{t_prev};
    const std::size_t first = k;
    while (k < times.size() && times[k] <= seg.t_end) ts.push_back(times[k++]);
    const bool extra = ts.back() < seg.t_end;
    if (extra) ts.push_back(seg.t_end);
    std::vector<double> got;
    auto stepper = odeint::make_dense_output(tol.abs, tol.rel, odeint::runge_kutta_dopri5<State>());
    odeint::integrate_times(stepper, rhs, s, ts.begin(), ts.end(), 1e-3,
                            [&got](const State& x, double) { got.push_back(x[0]); });
    for (std::size_t i = 1; i < got.size() - (extra ? 1 : 0); ++i) out.push_back(got[i]);
    if (out.size() != k || first > k) throw DivergenceError("integrate_memory_free: lost samples", k);
    s[0] = got.back();
    t_prev = seg.t_end;
  }
  if (k != times.size()) throw DomainError("integrate_memory_free: data times beyond the last segment");
  for (double v : out) {
    if (!std::isfinite(v)) throw DivergenceError("integrate_memory_free: non-finite state", k);
  }
  return out;
}

namespace {

std::vector<double> data_times(double t_end, std::size_t samples) {
  if (samples < 2 || !(t_end > 0.0)) throw ConfigError("dataset: need t_end > 0 and at least two samples");
  std::vector<double> t(samples);
  for (std::size_t k = 0; k < samples; ++k) t[k] = t_end * static_cast<double>(k + 1) / static_cast<double>(samples);
  return t;
}

/// Caputo run sampled at grid nodes matching `times`.
std::vector<double> caputo_samples(const models::RationalModel& model,
                                   const std::optional<models::ParameterSchedule>& schedule, fde::MemoryOrder order,
                                   double x0, double t_end, double h, const std::vector<double>& times,
                                   const fde::SolverOptions& solver) {
  fde::SolverGrid grid(0.0, t_end, h);
  std::vector<std::size_t> nodes;
  for (double t : times) {
    const auto n = grid.node(t);
    if (std::abs(grid.time(n) - t) > 1e-9 * std::max(1.0, t)) {
      throw ConfigError("dataset: data times must fall on solver nodes");
    }
    nodes.push_back(n);
  }
  const auto tr = fde::solve_caputo(model, schedule, order, x0, grid, solver);
  std::vector<double> x;
  for (auto n : nodes) x.push_back(tr.x[n]);
  return x;
}

}  // namespace

FitDataset generate_dataset(const models::HerbivoryParams& truth, fde::MemoryOrder order,
                            const std::vector<double>& b_values, const DatasetOptions& options) {
  if (b_values.empty()) throw ConfigError("dataset: no B values");
  const auto win = herbivory_window(truth.r, truth.K, truth.A);
  FitDataset ds;
  ds.alpha = order.alpha();
  ds.truth = truth;
  const auto times = data_times(options.t_end, options.samples);
  for (double B : b_values) {
    if (!win.contains(B)) {
      throw ConfigError("dataset: B = " + util::format_number(B) + " outside the bistable window (" +
                        util::format_number(win.lower) + ", " + util::format_number(win.upper) + ")");
    }
    auto p = truth;
    p.B = B;
    const auto model = models::RationalModel::herbivory(p);
    const auto eq = models::equilibria(model);
    const double xu = eq.unstable();
    for (double target : {eq.lower_stable(), eq.upper_stable()}) {
      FitRun run;
      run.B = B;
      run.x0 = xu + options.epsilon * (target - xu);
      run.t = times;
      run.x = order.memoryless()
                  ? integrate_memory_free(p.r, p.K, p.A, {{options.t_end, B}}, run.x0, 0.0, times)
                  : caputo_samples(model, std::nullopt, order, run.x0, options.t_end, options.h, times,
                                   options.solver);
      ds.runs.push_back(std::move(run));
    }
  }
  return ds;
}

namespace {

/// Distinct B values in first-seen order and the index of each run's B.
std::pair<std::vector<double>, std::vector<std::size_t>> group_b(const FitDataset& data) {
  std::vector<double> bs;
  std::vector<std::size_t> idx;
  for (const auto& run : data.runs) {
    std::size_t j = 0;
    while (j < bs.size() && bs[j] != run.B) ++j;
    if (j == bs.size()) bs.push_back(run.B);
    idx.push_back(j);
  }
  return {bs, idx};
}

double outside(const BistableWindow& w, double B) {
  if (!(w.upper > w.lower)) return 1.0 + std::abs(B);
  return std::max(0.0, w.lower - B) + std::max(0.0, B - w.upper);
}

}  // namespace

FitResult fit_memory_free(const FitDataset& data, const FitGuess& guess, const FitOptions& options) {
  if (data.runs.empty()) throw ConfigError("fit: empty dataset");
  const auto [bs, run_b] = group_b(data);
  const std::size_t m = bs.size();
  const std::size_t np = 3 + m;
  if (!options.run_weights.empty() && options.run_weights.size() != data.runs.size()) {
    throw ConfigError("fit: run_weights must have one entry per run");
  }
  const auto& bd = options.bounds;
  Eigen::VectorXd lo(np), hi(np), x0(np);
  lo.head(3) << bd.r_lo, bd.K_lo, bd.A_lo;
  hi.head(3) << bd.r_hi, bd.K_hi, bd.A_hi;
  x0.head(3) << guess.r, guess.K, guess.A;
  if (!guess.B.empty() && guess.B.size() != m) throw ConfigError("fit: guess needs one B per distinct dataset B");
  for (std::size_t j = 0; j < m; ++j) {
    lo[3 + j] = bd.B_lo;
    hi[3 + j] = bd.B_hi;
    x0[3 + j] = guess.B.empty() ? bs[j] : guess.B[j];
  }
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    if (!(x0[i] >= lo[i] && x0[i] <= hi[i])) throw FitError("fit: initial guess outside the bounds");
  }

  const std::size_t n_data = data.n_points();
  int penalized = 0;
  auto data_residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd res(n_data);
    auto run_res = [&](std::size_t i) {
      const auto& run = data.runs[i];
      return integrate_memory_free(p[0], p[1], p[2], {{run.t.back(), p[3 + run_b[i]]}}, run.x0, 0.0, run.t,
                                   options.ode);
    };
    std::vector<std::vector<double>> sims(data.runs.size());
    if (options.threads > 1) {
      std::vector<std::future<void>> jobs;
      const std::size_t nt = options.threads;
      for (std::size_t w = 0; w < nt; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
          for (std::size_t i = w; i < data.runs.size(); i += nt) sims[i] = run_res(i);
        }));
      }
      for (auto& j : jobs) j.get();
    } else {
      for (std::size_t i = 0; i < data.runs.size(); ++i) sims[i] = run_res(i);
    }
    std::size_t k = 0;
    for (std::size_t i = 0; i < data.runs.size(); ++i) {
      const double w = options.run_weights.empty() ? 1.0 : options.run_weights[i];
      for (std::size_t s = 0; s < sims[i].size(); ++s) res[k++] = w * (sims[i][s] - data.runs[i].x[s]);
    }
    return res;
  };
  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd res(n_data + m);
    res.head(n_data) = data_residual(p);
    const auto win = herbivory_window(p[0], p[1], p[2]);
    bool pen = false;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = outside(win, p[3 + j]);
      res[n_data + j] = options.penalty_weight * d;
      pen = pen || d > 0.0;
    }
    if (pen) ++penalized;
    return res;
  };

  FitResult fr;
  fr.bounds = bd;
  try {
    fr.initial_residual_norm = data_residual(x0).norm();
  } catch (const Error& e) {
    throw FitError(std::string("fit: initial guess cannot be integrated: ") + e.what());
  }
  const auto res = util::least_squares(residual, x0, lo, hi, options.lsq);
  fr.r = res.x[0];
  fr.K = res.x[1];
  fr.A = res.x[2];
  for (std::size_t j = 0; j < m; ++j) fr.B.push_back(res.x[3 + j]);
  fr.run_b = run_b;
  fr.residual_norm = res.residual.head(n_data).norm();
  fr.rmse = fr.residual_norm / std::sqrt(static_cast<double>(n_data));
  fr.iterations = res.iterations;
  fr.evaluations = res.evaluations;
  fr.penalized_evaluations = penalized;
  fr.converged = res.converged;
  fr.status = res.status;
  const auto win = herbivory_window(fr.r, fr.K, fr.A);
  fr.bistable = true;
  for (double B : fr.B) fr.bistable = fr.bistable && win.contains(B);
  return fr;
}

std::optional<double> FoldReport::interval() const {
  if (!lower || !upper) return std::nullopt;
  return *upper - *lower;
}

namespace {

/// Bistable with the lower stable state at a non-negative density.
bool ecologically_bistable(const models::HerbivoryParams& p, double B) {
  auto q = p;
  q.B = B;
  const auto eq = models::equilibria(models::RationalModel::herbivory(q));
  return eq.bistable() && eq.lower_stable() >= -models::kRootTolerance;
}

FoldReport bistable_edges(const models::HerbivoryParams& p, double b_lo, double b_hi, std::size_t resolution) {
  FoldReport rep;
  bool prev = ecologically_bistable(p, b_lo);
  double b_prev = b_lo;
  for (std::size_t i = 1; i < resolution; ++i) {
    const double b = b_lo + (b_hi - b_lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
    const bool cur = ecologically_bistable(p, b);
    if (cur != prev) {
      double a = b_prev, c = b;
      while (c - a > 1e-9) {
        const double mid = 0.5 * (a + c);
        if (ecologically_bistable(p, mid) == prev) a = mid;
        else c = mid;
      }
      const double edge = 0.5 * (a + c);
      if (cur) rep.lower = edge;
      else rep.upper = edge;
    }
    prev = cur;
    b_prev = b;
  }
  return rep;
}

}  // namespace

BifurcationComparison compare_bifurcations(const models::HerbivoryParams& truth, double alpha,
                                           const models::HerbivoryParams& fitted, double b_lo, double b_hi,
                                           std::size_t resolution) {
  if (!(b_hi > b_lo) || resolution < 2) throw DomainError("compare_bifurcations: invalid B range");
  BifurcationComparison c;
  c.alpha = alpha;
  c.truth = bistable_edges(truth, b_lo, b_hi, resolution);
  c.fitted = bistable_edges(fitted, b_lo, b_hi, resolution);
  if (c.truth.upper && c.fitted.upper) c.upper_shift = *c.fitted.upper - *c.truth.upper;
  const auto ti = c.truth.interval();
  const auto fi = c.fitted.interval();
  if (!ti || !fi) {
    c.structural_mismatch = true;
    c.message = std::string("bistable interval not closed in [") + util::format_number(b_lo) + ", " +
                util::format_number(b_hi) + "] for the " + (!ti ? "true" : "fitted") + " model";
    return c;
  }
  c.shrunk = *fi < *ti;
  return c;
}

TwoPulseResult two_pulse_inference(const models::HerbivoryParams& truth, fde::MemoryOrder order,
                                   const FitDataset& data, const FitResult& fit, const TwoPulseSetup& setup,
                                   const FitOptions& options) {
  if (!(setup.on1 < setup.off1 && setup.off1 <= setup.on2 && setup.on2 < setup.off2 && setup.off2 < setup.t_end)) {
    throw ConfigError("two-pulse: windows must be ordered inside (0, t_end)");
  }
  const auto [bs, run_b] = group_b(data);
  if (bs.size() != fit.B.size() || bs.size() < 2) throw ConfigError("two-pulse: fit does not match the dataset");
  // fitted B of base_B by linear interpolation (or extrapolation) in the dataset map
  std::map<double, double> map;
  for (std::size_t j = 0; j < bs.size(); ++j) map[bs[j]] = fit.B[j];
  auto hi_it = map.lower_bound(setup.base_B);
  if (hi_it == map.begin()) ++hi_it;
  if (hi_it == map.end()) --hi_it;
  auto lo_it = std::prev(hi_it);
  const double w = (setup.base_B - lo_it->first) / (hi_it->first - lo_it->first);
  TwoPulseResult out;
  out.base_B_fit = lo_it->second + w * (hi_it->second - lo_it->second);

  auto p = truth;
  p.B = setup.base_B;
  const auto model = models::RationalModel::herbivory(p);
  const auto eq = models::equilibria(model);
  if (!eq.bistable()) throw ConfigError("two-pulse: base B is not bistable for the true model");
  const models::ParameterSchedule sched(
      "B", setup.base_B,
      {{0.0, setup.on1, models::SegmentShape::kOffset, 0.0, 0.0},
       {setup.on1, setup.off1, models::SegmentShape::kOffset, -setup.offset1, 0.0},
       {setup.off1, setup.on2, models::SegmentShape::kOffset, 0.0, 0.0},
       {setup.on2, setup.off2, models::SegmentShape::kOffset, -setup.offset2, 0.0},
       {setup.off2, setup.t_end, models::SegmentShape::kOffset, 0.0, 0.0}});
  out.data.B = setup.base_B;
  out.data.x0 = eq.upper_stable();
  out.data.t = data_times(setup.t_end, setup.samples);
  out.data.x = order.memoryless()
                   ? integrate_memory_free(p.r, p.K, p.A,
                                           {{setup.on1, p.B},
                                            {setup.off1, p.B - setup.offset1},
                                            {setup.on2, p.B},
                                            {setup.off2, p.B - setup.offset2},
                                            {setup.t_end, p.B}},
                                           out.data.x0, 0.0, out.data.t, options.ode)
                   : caputo_samples(model, sched, order, out.data.x0, setup.t_end, setup.h, out.data.t,
                                    fde::SolverOptions{.history = fde::HistoryMethod::kFft});

  const double b0 = out.base_B_fit;
  auto simulate = [&](double d1, double d2) {
    return integrate_memory_free(fit.r, fit.K, fit.A,
                                 {{setup.on1, b0}, {setup.off1, b0 - d1}, {setup.on2, b0}, {setup.off2, b0 - d2},
                                  {setup.t_end, b0}},
                                 out.data.x0, 0.0, out.data.t, options.ode);
  };
  auto residual = [&](const Eigen::VectorXd& d) {
    const auto x = simulate(d[0], d[1]);
    Eigen::VectorXd r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[static_cast<Eigen::Index>(i)] = x[i] - out.data.x[i];
    return r;
  };
  Eigen::VectorXd start(2), lo(2), hi(2);
  start << setup.offset1, setup.offset2;
  lo << 0.0, 0.0;
  hi << 4.0 * setup.offset1, 4.0 * setup.offset2;
  const auto res = util::least_squares(residual, start, lo, hi, options.lsq);
  out.inferred1 = res.x[0];
  out.inferred2 = res.x[1];
  out.fitted_x = simulate(out.inferred1, out.inferred2);
  out.rmse = res.residual.norm() / std::sqrt(static_cast<double>(res.residual.size()));
  return out;
}

void write_dataset_csv(const FitDataset& data, const std::string& path) {
  util::CsvWriter csv(path, {"run", "B", "x0", "t", "x"},
                      {"alpha=" + util::format_number(data.alpha), "r=" + util::format_number(data.truth.r),
                       "K=" + util::format_number(data.truth.K), "A=" + util::format_number(data.truth.A)});
  for (std::size_t i = 0; i < data.runs.size(); ++i) {
    const auto& run = data.runs[i];
    for (std::size_t k = 0; k < run.t.size(); ++k) {
      csv.row(std::vector<double>{static_cast<double>(i), run.B, run.x0, run.t[k], run.x[k]});
    }
  }
}

void write_fit_json(const FitResult& fit, const BifurcationComparison& cmp, const std::string& path) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["fit"] = {{"r", fit.r},
              {"K", fit.K},
              {"A", fit.A},
              {"B", fit.B},
              {"residual_norm", fit.residual_norm},
              {"initial_residual_norm", fit.initial_residual_norm},
              {"rmse", fit.rmse},
              {"iterations", fit.iterations},
              {"evaluations", fit.evaluations},
              {"penalized_evaluations", fit.penalized_evaluations},
              {"converged", fit.converged},
              {"bistable", fit.bistable},
              {"status", fit.status}};
  const auto& b = fit.bounds;
  j["bounds"] = {{"r", {b.r_lo, b.r_hi}}, {"K", {b.K_lo, b.K_hi}}, {"A", {b.A_lo, b.A_hi}}, {"B", {b.B_lo, b.B_hi}}};
  j["bifurcation"] = {{"alpha", cmp.alpha},
                      {"true_lower", opt(cmp.truth.lower)},
                      {"true_upper", opt(cmp.truth.upper)},
                      {"fitted_lower", opt(cmp.fitted.lower)},
                      {"fitted_upper", opt(cmp.fitted.upper)},
                      {"upper_shift", opt(cmp.upper_shift)},
                      {"true_interval", opt(cmp.truth.interval())},
                      {"fitted_interval", opt(cmp.fitted.interval())},
                      {"shrunk", cmp.shrunk},
                      {"structural_mismatch", cmp.structural_mismatch},
                      {"message", cmp.message}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path);
  out << std::setw(2) << j << '\n';
}

}  // namespace fracland::fitting
