#include <fftw3.h>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <Eigen/Core>
#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <type_traits>

#include "fracland/abm/lattice.hpp"
#include "fracland/errors.hpp"
#include "fracland/landscape/landscape.hpp"
#include "fracland/stochastic/spectral.hpp"
#include "fracland/stochastic/stationary.hpp"
#include "fracland/util/csv.hpp"
#include "fracland/util/stats.hpp"
#include "fracland_cli/experiments.hpp"

#ifndef FRACLAND_VERSION
#define FRACLAND_VERSION "unknown"
#endif

namespace fracland::cli {

namespace {

using nlohmann::json;
using util::format_number;
namespace fs = std::filesystem;

/// f(0..n-1) on up to `threads` workers, results in index order.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) {
  using R = std::invoke_result_t<F&, std::size_t>;
  std::vector<std::optional<R>> slots(n);
  const auto workers = static_cast<std::size_t>(std::max(1u, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) slots[i] = f(i);
  } else {
    const std::size_t w_count = std::min(workers, n);
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < w_count; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < n; i += w_count) slots[i] = f(i);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  /// Full path for a new artifact; it is listed in the manifest in this order.
  std::string add(const std::string& name) {
    names_.push_back(name);
    return (dir_ / name).string();
  }

  [[nodiscard]] json listing() const {
    auto out = json::array();
    for (const auto& n : names_) {
      const auto p = dir_ / n;
      out.push_back({{"path", n}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
    }
    return out;
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path);
  out << j.dump(2) << '\n';
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string model_id(const models::RationalModel& m) {
  std::string kind = m.kind() == models::ModelKind::kCubic       ? "cubic"
                     : m.kind() == models::ModelKind::kHerbivory ? "herbivory"
                                                                 : "quorum";
  std::string args;
  for (const auto& p : m.parameter_names()) {
    args += (args.empty() ? "" : ";") + p + "=" + format_number(m.parameter(p));
  }
  return kind + "(" + args + ")";
}

std::vector<std::string> metadata(const Experiment& e) {
  return {"kind=" + e.kind, "seed=" + std::to_string(e.seed)};
}

std::string alpha_tag(double a) { return "alpha" + format_number(a); }

json versions() {
  return {{"fracland", FRACLAND_VERSION},
          {"boost", BOOST_LIB_VERSION},
          {"fmt", FMT_VERSION},
          {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
          {"fftw", std::string(fftw_version)},
          {"openssl", OPENSSL_VERSION_TEXT},
#if defined(__clang__)
          {"compiler", "clang " __clang_version__},
#elif defined(__GNUC__)
          {"compiler", "gcc " __VERSION__},
#else
          {"compiler", "unknown"},
#endif
          {"cxx", __cplusplus}};
}

void run_simulate(const Experiment& e, const SimulateSpec& s, Artifacts& out) {
  const fde::SolverGrid grid(s.t0, s.t_end, s.h);
  std::vector<double> path;
  if (s.noise) path = stochastic::noise_path(grid.n_steps(), s.noise->seed);
  auto runs = parallel_map(s.alphas.size(), e.threads, [&](std::size_t i) {
    const fde::MemoryOrder order(s.alphas[i]);
    if (s.noise) return stochastic::simulate_sde(s.model, s.schedule, order, *s.noise, s.x0, grid, s.solver, path);
    return fde::solve_caputo(s.model, s.schedule, order, s.x0, grid, s.solver);
  });
  std::vector<std::string> cols{"alpha", "t", "x"};
  std::vector<double> values;
  if (s.schedule) {
    cols.push_back(s.schedule->parameter());
    values = s.schedule->sample(grid);
  }
  auto meta = metadata(e);
  meta.push_back("model=" + model_id(s.model));
  util::CsvWriter csv(out.add("trajectories.csv"), cols, meta);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& tr = runs[i];
    for (std::size_t n = 0; n < tr.x.size(); n += s.sample_every) {
      std::vector<double> row{s.alphas[i], tr.t[n], tr.x[n]};
      if (s.schedule) row.push_back(values[n]);
      csv.row(row);
    }
  }
}

void run_landscape(const Experiment& e, const LandscapeSpec& s, Artifacts& out) {
  const auto eq = models::equilibria(s.model);
  struct Result {
    landscape::LandscapeProfile profile;
    std::optional<landscape::BasinMetrics> basin;
    std::string note;
  };
  auto results = parallel_map(s.alphas.size(), e.threads, [&](std::size_t i) {
    auto setup = landscape::default_setup(eq, s.h, s.t_end);
    setup.h = landscape::landscape_step(s.model, setup.x_lo, setup.x_hi, s.h);
    setup.epsilon_fraction = s.epsilon_fraction;
    setup.solver = s.solver;
    Result r;
    r.profile = landscape::model_landscape(s.model, fde::MemoryOrder(s.alphas[i]), setup);
    try {
      r.basin = landscape::basin_metrics(r.profile);
    } catch (const MetricError& err) {
      r.note = err.what();
    }
    return r;
  });

  std::function<double(double)> analytic;
  try {
    analytic = landscape::analytic_potential(s.model);
  } catch (const CapabilityError&) {
  }
  util::CsvWriter csv(out.add("metrics.csv"),
                      {"alpha", "anchor", "minimum", "depth", "curvature", "static_gap", "note"}, metadata(e));
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto name = "profile_" + alpha_tag(s.alphas[i]) + ".csv";
    landscape::write_profile_csv(r.profile, out.add(name), model_id(s.model), "none");
    std::optional<double> gap;
    if (analytic) {
      double g = 0.0;
      const double v0 = analytic(r.profile.anchor);
      for (std::size_t k = 0; k < r.profile.x.size(); ++k) {
        g = std::max(g, std::fabs(r.profile.V[k] - (analytic(r.profile.x[k]) - v0)));
      }
      gap = g;
    }
    const auto& b = r.basin;
    csv.row(std::vector<std::string>{format_number(s.alphas[i]), format_number(r.profile.anchor),
                                     b ? format_number(b->minimum) : "", b ? format_number(b->depth) : "",
                                     b ? format_number(b->curvature) : "", cell(gap), r.note});
  }
}

void run_ensemble(const Experiment& e, const EnsembleSpec& s, Artifacts& out) {
  const auto ms = models::sample_ensemble(s.n, e.seed, s.bounds);
  auto options = s.options;
  options.threads = e.threads;
  const auto records = perturbation::ensemble_study(ms, options);
  perturbation::write_ensemble_csv(records, out.add("ensemble.csv"), metadata(e));

  json summary;
  summary["n"] = s.n;
  summary["alphas"] = options.alphas;
  std::vector<double> depth, flatness;
  for (const auto& r : records) {
    for (const auto& en : r.entries) {
      if (en.basin && en.basin->flatness) {
        depth.push_back(en.basin->depth);
        flatness.push_back(*en.basin->flatness);
      }
    }
  }
  summary["spearman_depth_flatness"] = depth.size() > 2 ? json(util::spearman(depth, flatness)) : json(nullptr);
  auto per = json::array();
  for (std::size_t i = 1; i < options.alphas.size(); ++i) {
    std::size_t flatter = 0, curv_defined = 0, res_neg = 0, res_defined = 0, rst_pos = 0, rst_defined = 0;
    for (const auto& r : records) {
      const auto& ref = r.entries[0];
      const auto& en = r.entries[i];
      if (ref.basin && en.basin) {
        ++curv_defined;
        flatter += std::fabs(en.basin->curvature) < std::fabs(ref.basin->curvature);
      }
      if (auto v = r.relative_resilience(i)) {
        ++res_defined;
        res_neg += *v < 0.0;
      }
      if (auto v = r.relative_resistance(i)) {
        ++rst_defined;
        rst_pos += *v > 0.0;
      }
    }
    per.push_back({{"alpha", options.alphas[i]},
                   {"flatter", flatter},
                   {"curvature_defined", curv_defined},
                   {"resilience_negative", res_neg},
                   {"resilience_defined", res_defined},
                   {"resistance_positive", rst_pos},
                   {"resistance_defined", rst_defined}});
  }
  summary["against_reference"] = per;
  write_json(summary, out.add("summary.json"));
}

std::string outcome_name(perturbation::ProbeOutcome o) {
  switch (o) {
    case perturbation::ProbeOutcome::kReturned: return "returned";
    case perturbation::ProbeOutcome::kTransitioned: return "transitioned";
    case perturbation::ProbeOutcome::kUnresolved: break;
  }
  return "unresolved";
}

void run_pulse(const Experiment& e, const PulseSpec& s, Artifacts& out) {
  const fde::SolverGrid grid(0.0, s.t_end, s.h);
  const auto sched = models::ParameterSchedule::pulse(s.parameter, s.model.parameter(s.parameter), s.magnitude,
                                                      s.t_on, s.t_off, 0.0, s.t_end);
  struct Result {
    perturbation::ResilienceResult resilience;
    fde::Trajectory trajectory;
    std::optional<perturbation::ResistanceResult> resistance;
    std::vector<perturbation::Probe> probes;
    std::string note;
  };
  auto results = parallel_map(s.alphas.size(), e.threads, [&](std::size_t i) {
    const fde::MemoryOrder order(s.alphas[i]);
    Result r;
    r.resilience = perturbation::resilience_index(s.model, order, sched, grid, s.solver);
    r.trajectory = fde::solve_caputo(s.model, sched, order, r.resilience.x0, grid, s.solver);
    if (s.resistance) {
      try {
        r.resistance = perturbation::resistance_search(s.model, order, s.pulse, s.lo, s.hi, s.tolerance, s.solver);
        r.probes = r.resistance->probes;
      } catch (const perturbation::BracketAnomaly& err) {
        r.probes = err.probes();
        r.note = err.what();
      }
    }
    return r;
  });

  const auto meta = [&] {
    auto m = metadata(e);
    m.push_back("model=" + model_id(s.model));
    return m;
  }();
  {
    util::CsvWriter csv(out.add("resilience.csv"),
                        {"alpha", "x0", "xp", "xn", "t_p", "t_n", "threshold", "rate", "recovered", "transitioned"},
                        meta);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i].resilience;
      csv.row(std::vector<std::string>{format_number(s.alphas[i]), format_number(r.x0), format_number(r.xp),
                                       format_number(r.xn), format_number(r.t_p), format_number(r.t_n),
                                       format_number(r.threshold), r.recovered ? format_number(r.value) : "",
                                       r.recovered ? "1" : "0", r.transitioned ? "1" : "0"});
    }
  }
  {
    util::CsvWriter csv(out.add("trajectories.csv"), {"alpha", "t", "x", s.parameter}, meta);
    const auto values = sched.sample(grid);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& tr = results[i].trajectory;
      for (std::size_t n = 0; n < tr.x.size(); n += s.sample_every) csv.row({s.alphas[i], tr.t[n], tr.x[n], values[n]});
    }
  }
  if (s.resistance) {
    util::CsvWriter csv(out.add("resistance.csv"), {"alpha", "p_star", "lower", "upper", "bracket_width", "note"},
                        meta);
    util::CsvWriter probes(out.add("probes.csv"), {"alpha", "probe", "magnitude", "outcome"}, meta);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      if (r.resistance) {
        const auto& q = *r.resistance;
        csv.row(std::vector<std::string>{format_number(s.alphas[i]), format_number(q.p_star), format_number(q.lower),
                                         format_number(q.upper), format_number(q.bracket_width()), ""});
      } else {
        csv.row(std::vector<std::string>{format_number(s.alphas[i]), "", "", "", "", r.note});
      }
      for (std::size_t k = 0; k < r.probes.size(); ++k) {
        probes.row(std::vector<std::string>{format_number(s.alphas[i]), std::to_string(k),
                                            format_number(r.probes[k].magnitude), outcome_name(r.probes[k].outcome)});
      }
    }
  }

  json summary;
  summary["reference_alpha"] = s.alphas[0];
  auto per = json::array();
  const auto& ref = results[0];
  for (std::size_t i = 1; i < results.size(); ++i) {
    const auto& r = results[i];
    json j{{"alpha", s.alphas[i]}};
    std::optional<double> rel_res, rel_rst, diff_rst;
    try {
      if (r.resilience.recovered && ref.resilience.recovered) {
        rel_res = perturbation::relative_effect(r.resilience.value, ref.resilience.value);
      }
      if (r.resistance && ref.resistance) {
        diff_rst = r.resistance->p_star - ref.resistance->p_star;
        rel_rst = perturbation::relative_effect(r.resistance->p_star, ref.resistance->p_star);
      }
    } catch (const MetricError&) {
    }
    j["relative_resilience"] = opt(rel_res);
    j["resistance_difference"] = opt(diff_rst);
    j["relative_resistance"] = opt(rel_rst);
    per.push_back(j);
  }
  summary["against_reference"] = per;
  write_json(summary, out.add("summary.json"));
}

void run_stochastic(const Experiment& e, const StochasticSpec& s, Artifacts& out) {
  const fde::SolverGrid grid(0.0, s.t_end, s.h);
  const std::size_t n_alpha = s.alphas.size();
  struct Unit {
    std::vector<double> variance;
    std::vector<double> tau;
    std::vector<double> acf;
    stochastic::PsdEstimate psd;
    stochastic::DwellRecord dwell;
    std::size_t crossings = 0;
    std::optional<double> density_distance;
    fde::Trajectory trajectory;
  };
  auto units = parallel_map(s.replicates * n_alpha, e.threads, [&](std::size_t u) {
    const std::size_t rep = u / n_alpha;
    const double alpha = s.alphas[u % n_alpha];
    auto noise = s.noise;
    noise.seed = e.seed + rep;
    const auto path = stochastic::noise_path(grid.n_steps(), noise.seed);
    Unit r;
    r.trajectory = stochastic::simulate_sde(s.model, fde::MemoryOrder(alpha), noise, s.x0, grid, s.solver, path);
    const auto x = stochastic::after_burn_in(r.trajectory, s.burn_in);
    r.variance = stochastic::block_variance(x, s.block_sizes);
    for (auto m : s.tau_blocks) {
      const auto bm = stochastic::block_means(x, m);
      const double step = static_cast<double>(m) * s.h;
      const auto lags = std::min(bm.size() - 1, static_cast<std::size_t>(std::ceil(s.tau_window / step)));
      r.tau.push_back(stochastic::correlation_stats(bm, step, lags, s.tau_window).tau_int);
    }
    r.acf = stochastic::autocorrelation(x, static_cast<std::size_t>(std::llround(s.acf_max_lag / s.h)));
    r.psd = stochastic::welch_psd(x, s.h, s.psd_segment, s.psd_overlap);
    r.dwell = stochastic::detect_committed(x, s.h, s.commit, s.burn_in);
    r.crossings = stochastic::zero_crossings(x);
    if (alpha == 1.0 && s.noise.kind == stochastic::NoiseKind::kAdditive) {
      try {
        r.density_distance =
            stochastic::stationary_density_check(x, fde::MemoryOrder(1.0), s.model, s.noise.sigma).distance;
      } catch (const Error&) {
      }
    }
    if (s.trajectory_every == 0) r.trajectory = {};
    return r;
  });

  auto meta = metadata(e);
  meta.push_back("model=" + model_id(s.model));
  meta.push_back("sigma=" + format_number(s.noise.sigma));
  const std::vector<std::string> key{"replicate", "seed", "alpha"};
  auto cols = [&](std::vector<std::string> extra) {
    auto c = key;
    c.insert(c.end(), extra.begin(), extra.end());
    return c;
  };
  util::CsvWriter variance(out.add("variance.csv"), cols({"m", "variance"}), meta);
  util::CsvWriter tau(out.add("tau.csv"), cols({"m", "tau_int"}), meta);
  util::CsvWriter acf(out.add("acf.csv"), cols({"lag", "acf"}), meta);
  util::CsvWriter psd(out.add("psd.csv"), cols({"f", "omega", "S"}), meta);
  util::CsvWriter events(out.add("events.csv"), cols({"time", "direction"}), meta);
  util::CsvWriter dwells(out.add("dwells.csv"), cols({"dwell"}), meta);
  std::unique_ptr<util::CsvWriter> traj;
  if (s.trajectory_every > 0) traj = std::make_unique<util::CsvWriter>(out.add("trajectories.csv"), cols({"t", "x"}), meta);

  std::vector<std::vector<double>> pooled(n_alpha);
  auto per_alpha = json::array();
  for (std::size_t a = 0; a < n_alpha; ++a) per_alpha.push_back({{"alpha", s.alphas[a]}, {"replicates", json::array()}});
  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::size_t rep = u / n_alpha, a = u % n_alpha;
    const auto& r = units[u];
    const double seed = static_cast<double>(e.seed + rep);
    const std::vector<double> k{static_cast<double>(rep), seed, s.alphas[a]};
    auto with = [&](std::initializer_list<double> v) {
      auto row = k;
      row.insert(row.end(), v);
      return row;
    };
    for (std::size_t i = 0; i < s.block_sizes.size(); ++i) {
      variance.row(with({static_cast<double>(s.block_sizes[i]), r.variance[i]}));
    }
    for (std::size_t i = 0; i < s.tau_blocks.size(); ++i) tau.row(with({static_cast<double>(s.tau_blocks[i]), r.tau[i]}));
    for (std::size_t i = 0; i < r.acf.size(); ++i) acf.row(with({static_cast<double>(i) * s.h, r.acf[i]}));
    for (std::size_t i = 0; i < r.psd.f.size(); ++i) psd.row(with({r.psd.f[i], r.psd.omega[i], r.psd.S[i]}));
    for (std::size_t i = 0; i < r.dwell.entry_times.size(); ++i) {
      events.row(with({r.dwell.entry_times[i], static_cast<double>(r.dwell.entry_signs[i])}));
    }
    for (double d : r.dwell.dwells) dwells.row(with({d}));
    if (traj) {
      for (std::size_t n = 0; n < r.trajectory.x.size(); n += s.trajectory_every) {
        traj->row(with({r.trajectory.t[n], r.trajectory.x[n]}));
      }
    }
    pooled[a].insert(pooled[a].end(), r.dwell.dwells.begin(), r.dwell.dwells.end());
    const auto ds = stochastic::dwell_summary(r.dwell.dwells);
    json j{{"seed", e.seed + rep},
           {"transitions", r.dwell.transitions()},
           {"zero_crossings", r.crossings},
           {"dwells", ds.count},
           {"mean_dwell", ds.count ? json(ds.mean) : json(nullptr)},
           {"median_dwell", ds.count ? json(ds.median) : json(nullptr)},
           {"tau_int", r.tau}};
    if (r.density_distance) j["density_distance"] = *r.density_distance;
    per_alpha[a]["replicates"].push_back(j);
  }

  std::vector<double> grid_t;
  for (double t = 0.0; t <= s.survival_t_max + 1e-9; t += s.survival_step) grid_t.push_back(t);
  std::vector<std::string> scols{"t"};
  for (double a : s.alphas) scols.push_back(alpha_tag(a));
  util::CsvWriter surv(out.add("survival.csv"), scols, meta);
  std::vector<std::vector<double>> curves;
  for (const auto& p : pooled) curves.push_back(stochastic::survival_curve(p, grid_t));
  for (std::size_t i = 0; i < grid_t.size(); ++i) {
    std::vector<double> row{grid_t[i]};
    for (const auto& c : curves) row.push_back(c[i]);
    surv.row(row);
  }
  for (std::size_t a = 0; a < n_alpha; ++a) {
    const auto ds = stochastic::dwell_summary(pooled[a]);
    per_alpha[a]["pooled"] = {{"dwells", ds.count},
                              {"mean_dwell", ds.count ? json(ds.mean) : json(nullptr)},
                              {"median_dwell", ds.count ? json(ds.median) : json(nullptr)}};
  }
  write_json({{"alphas", per_alpha}}, out.add("summary.json"));
}

void run_fit(const Experiment& e, const FitSpec& s, Artifacts& out) {
  const fde::MemoryOrder order(s.alpha);
  const auto data = fitting::generate_dataset(s.truth, order, s.b_values, s.dataset);
  auto options = s.options;
  options.threads = e.threads;
  const auto fit = fitting::fit_memory_free(data, s.guess, options);
  const models::HerbivoryParams fitted{fit.r, fit.K, fit.A, 0.0};
  const auto cmp = fitting::compare_bifurcations(s.truth, s.alpha, fitted, 0.0, s.b_hi);
  fitting::write_dataset_csv(data, out.add("dataset.csv"));
  fitting::write_fit_json(fit, cmp, out.add("fit.json"));

  {
    util::CsvWriter csv(out.add("fit_curves.csv"), {"run", "B", "B_fit", "t", "data", "fitted"}, metadata(e));
    for (std::size_t i = 0; i < data.runs.size(); ++i) {
      const auto& run = data.runs[i];
      const double b_fit = fit.B[fit.run_b[i]];
      const auto x =
          fitting::integrate_memory_free(fit.r, fit.K, fit.A, {{run.t.back(), b_fit}}, run.x0, 0.0, run.t, options.ode);
      for (std::size_t k = 0; k < run.t.size(); ++k) {
        csv.row({static_cast<double>(i), run.B, b_fit, run.t[k], run.x[k], x[k]});
      }
    }
  }
  {
    util::CsvWriter csv(out.add("bifurcation.csv"), {"model", "B", "x", "stable"}, metadata(e));
    for (const auto& [label, p] : {std::pair{std::string("true"), s.truth}, std::pair{std::string("fitted"), fitted}}) {
      auto hp = p;
      hp.B = 0.5 * s.b_hi;
      const auto sweep = models::bifurcation_sweep(models::RationalModel::herbivory(hp), "B", 0.0, s.b_hi, 501);
      for (std::size_t i = 0; i < sweep.values.size(); ++i) {
        for (const auto& root : sweep.branches[i].roots) {
          csv.row(std::vector<std::string>{label, format_number(sweep.values[i]), format_number(root.x),
                                           root.stability == models::Stability::kStable ? "1" : "0"});
        }
      }
    }
  }
  json summary{{"rmse", fit.rmse},
               {"converged", fit.converged},
               {"true_upper_fold", opt(cmp.truth.upper)},
               {"fitted_upper_fold", opt(cmp.fitted.upper)},
               {"upper_shift", opt(cmp.upper_shift)},
               {"shrunk", cmp.shrunk}};
  if (s.two_pulse) {
    const auto tp = fitting::two_pulse_inference(s.truth, order, data, fit, s.two_pulse_setup, options);
    util::CsvWriter csv(out.add("two_pulse.csv"), {"t", "data", "fitted"}, metadata(e));
    for (std::size_t k = 0; k < tp.data.t.size(); ++k) csv.row({tp.data.t[k], tp.data.x[k], tp.fitted_x[k]});
    summary["two_pulse"] = {{"true_offsets", {s.two_pulse_setup.offset1, s.two_pulse_setup.offset2}},
                            {"inferred_offsets", {tp.inferred1, tp.inferred2}},
                            {"base_B_fit", tp.base_B_fit},
                            {"rmse", tp.rmse}};
  }
  write_json(summary, out.add("summary.json"));
}

void run_abm(const Experiment& e, const AbmSpec& s, Artifacts& out) {
  auto g = abm::paired_geometry(s.geometry_seed, s.free_side, s.porous_side, s.obstacles, s.agents);
  for (auto* c : {&g.open, &g.porous}) {
    if (s.K) c->K = *s.K;
    c->r = s.r;
    c->crowding = s.crowding;
    c->crowding_radius = s.radius;
    c->trap_steps = s.trap_steps;
    c->steps = s.steps;
  }
  const double K = g.open.K;
  const std::vector<std::pair<std::string, const abm::LatticeConfig*>> geoms{{"open", &g.open}, {"porous", &g.porous}};

  auto t90 = parallel_map(s.t90_seeds.size(), e.threads, [&](std::size_t i) {
    const auto a = abm::run_lattice(g.open, s.t90_seeds[i]);
    const auto b = abm::run_lattice(g.porous, s.t90_seeds[i]);
    return std::pair{abm::time_to_fraction(a, K, s.fraction), abm::time_to_fraction(b, K, s.fraction)};
  });
  std::size_t slower = 0;
  {
    util::CsvWriter csv(out.add("t90.csv"), {"seed", "open", "porous"}, metadata(e));
    for (std::size_t i = 0; i < t90.size(); ++i) {
      const auto& [a, b] = t90[i];
      auto c = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
      csv.row(std::vector<std::string>{std::to_string(s.t90_seeds[i]), c(a), c(b)});
      slower += a && (!b || *b > *a);
    }
  }

  struct GeometryResult {
    abm::LatticeRun base;
    std::optional<abm::RestartEnsemble> snapshot, macro;
    std::optional<abm::RestartComparison> ks;
    std::optional<abm::MsdCurve> msd;
  };
  auto results = parallel_map(geoms.size(), e.threads, [&](std::size_t i) {
    auto cfg = *geoms[i].second;
    cfg.record_positions = s.msd || s.write_positions;
    GeometryResult r;
    std::vector<int> snaps;
    if (s.restart) snaps.push_back(s.restart_step);
    r.base = abm::run_lattice(cfg, s.baseline_seed, snaps);
    if (s.restart) {
      cfg.record_positions = false;
      const auto& state = r.base.snapshots.at(0);
      r.snapshot = abm::restart_experiment(cfg, state, s.replicates, abm::RestartMode::kSnapshot, s.snapshot_seed);
      r.macro = abm::restart_experiment(cfg, state, s.replicates, abm::RestartMode::kMacroMatched, s.macro_seed);
      r.ks = abm::compare_restarts(*r.snapshot, *r.macro, s.horizons);
    }
    if (s.msd) r.msd = abm::msd({r.base}, s.fit_lo, s.fit_hi);
    return r;
  });

  abm::write_population_csv({&results[0].base, &results[1].base}, {"open", "porous"}, out.add("population.csv"));
  json summary{{"K", K},
               {"fraction", s.fraction},
               {"t90_pairs", t90.size()},
               {"t90_porous_slower", slower},
               {"geometries", json::object()}};
  if (s.restart) {
    util::CsvWriter csv(out.add("restart.csv"),
                        {"geometry", "horizon", "D", "p", "snapshot_mean", "macro_mean", "snapshot_lo", "snapshot_hi",
                         "macro_lo", "macro_hi"},
                        metadata(e));
    for (std::size_t i = 0; i < geoms.size(); ++i) {
      const auto& r = results[i];
      for (std::size_t k = 0; k < r.ks->horizons.size(); ++k) {
        const int h = r.ks->horizons[k];
        const auto [sl, sh] = r.snapshot->band(h);
        const auto [ml, mh] = r.macro->band(h);
        csv.row(std::vector<std::string>{geoms[i].first, std::to_string(h), format_number(r.ks->ks[k].D),
                                         format_number(r.ks->ks[k].p), format_number(r.snapshot->mean(h)),
                                         format_number(r.macro->mean(h)), format_number(sl), format_number(sh),
                                         format_number(ml), format_number(mh)});
      }
    }
  }
  if (s.msd) {
    util::CsvWriter csv(out.add("msd.csv"), {"geometry", "lag", "msd", "agents"}, metadata(e));
    for (std::size_t i = 0; i < geoms.size(); ++i) {
      const auto& m = *results[i].msd;
      for (std::size_t k = 0; k < m.lag.size(); ++k) {
        csv.row(std::vector<std::string>{geoms[i].first, std::to_string(m.lag[k]), format_number(m.msd[k]),
                                         std::to_string(m.agents[k])});
      }
    }
  }
  for (std::size_t i = 0; i < geoms.size(); ++i) {
    const auto& r = results[i];
    json j{{"free_cells", geoms[i].second->free_cells()}, {"final_N", r.base.N.back()}};
    if (s.restart) {
      j["restart_N"] = r.base.snapshots.at(0).agents.size();
      auto ks = json::array();
      for (std::size_t k = 0; k < r.ks->horizons.size(); ++k) {
        ks.push_back({{"horizon", r.ks->horizons[k]}, {"D", r.ks->ks[k].D}, {"p", r.ks->ks[k].p}});
      }
      j["ks"] = ks;
    }
    if (s.msd) j["msd_exponent"] = opt(results[i].msd->exponent);
    summary["geometries"][geoms[i].first] = j;
    if (s.write_positions) abm::write_positions_csv(r.base, out.add("positions_" + geoms[i].first + ".csv"));
  }
  write_json(summary, out.add("summary.json"));
}

void run_hysteresis(const Experiment& e, const HysteresisSpec& s, Artifacts& out) {
  const fde::SolverGrid grid(0.0, s.t_end, s.h);
  const models::ParameterSchedule sched(
      "rho", s.rho_high,
      {{0.0, s.t_turn, models::SegmentShape::kSmoothstep, s.rho_high, s.rho_low},
       {s.t_turn, s.t_end, models::SegmentShape::kSmoothstep, s.rho_low, s.rho_high}});
  const auto model = models::RationalModel::quorum(s.quorum);
  const auto rho = sched.sample(grid);
  const auto stride = static_cast<std::size_t>(std::llround(s.sample_interval / s.h));
  stochastic::NoiseSpec noise;
  noise.sigma = s.rhs_std * std::sqrt(s.h);
  const std::size_t n_alpha = s.alphas.size();

  struct Unit {
    std::vector<double> t, rho, x;
    LoopSummary loop;
  };
  auto units = parallel_map(s.replicates * n_alpha, e.threads, [&](std::size_t u) {
    const std::size_t rep = u / n_alpha;
    auto nz = noise;
    nz.seed = e.seed + rep;
    const auto path = stochastic::noise_path(grid.n_steps(), nz.seed);
    Unit r;
    if (nz.sigma > 0.0) {
      const auto tr =
          stochastic::simulate_sde(model, sched, fde::MemoryOrder(s.alphas[u % n_alpha]), nz, s.x_init, grid, s.solver, path);
      for (std::size_t n = 0; n < tr.x.size(); n += stride) {
        r.t.push_back(tr.t[n]);
        r.rho.push_back(rho[n]);
        r.x.push_back(tr.x[n]);
      }
    } else {
      const auto tr = fde::solve_caputo(model, sched, fde::MemoryOrder(s.alphas[u % n_alpha]), s.x_init, grid, s.solver);
      for (std::size_t n = 0; n < tr.x.size(); n += stride) {
        r.t.push_back(tr.t[n]);
        r.rho.push_back(rho[n]);
        r.x.push_back(tr.x[n]);
      }
    }
    r.loop = summarize_loop(r.t, r.rho, r.x, s.quorum, s.t_turn, s.hold, s.bin_width);
    return r;
  });

  auto meta = metadata(e);
  meta.push_back("rhs_std=" + format_number(s.rhs_std));
  util::CsvWriter loop(out.add("loop.csv"), {"replicate", "seed", "alpha", "leg", "t", "rho", "x"}, meta);
  util::CsvWriter thr(out.add("thresholds.csv"),
                      {"replicate", "seed", "alpha", "collapse_rho", "recovery_rho", "width", "area"}, meta);
  struct Acc {
    std::size_t complete = 0, collapsed = 0;
    double width = 0.0, area = 0.0, collapse = 0.0, recovery = 0.0;
  };
  std::vector<Acc> acc(n_alpha);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::size_t rep = u / n_alpha, a = u % n_alpha;
    const auto& r = units[u];
    const auto rs = std::to_string(rep), seed = std::to_string(e.seed + rep), al = format_number(s.alphas[a]);
    for (std::size_t k = 0; k < r.t.size(); ++k) {
      loop.row(std::vector<std::string>{rs, seed, al, r.t[k] < s.t_turn ? "collapse" : "recovery",
                                        format_number(r.t[k]), format_number(r.rho[k]), format_number(r.x[k])});
    }
    const auto& l = r.loop;
    thr.row(std::vector<std::string>{rs, seed, al, cell(l.collapse_rho), cell(l.recovery_rho), cell(l.width),
                                     format_number(l.area)});
    auto& c = acc[a];
    c.area += l.area;
    if (l.collapse_rho) {
      ++c.collapsed;
      c.collapse += *l.collapse_rho;
    }
    if (l.width) {
      ++c.complete;
      c.width += *l.width;
      c.recovery += *l.recovery_rho;
    }
  }
  auto per = json::array();
  for (std::size_t a = 0; a < n_alpha; ++a) {
    const auto& c = acc[a];
    auto mean = [](double sum, std::size_t n) { return n ? json(sum / static_cast<double>(n)) : json(nullptr); };
    per.push_back({{"alpha", s.alphas[a]},
                   {"runs", s.replicates},
                   {"collapsed", c.collapsed},
                   {"complete_loops", c.complete},
                   {"mean_collapse_rho", mean(c.collapse, c.collapsed)},
                   {"mean_recovery_rho", mean(c.recovery, c.complete)},
                   {"mean_width", mean(c.width, c.complete)},
                   {"mean_area", mean(c.area, s.replicates)}});
  }
  write_json({{"sigma", noise.sigma}, {"alphas", per}}, out.add("summary.json"));
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1) {
      throw Error("sha256: update failed");
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) throw Error("sha256: final failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

LoopSummary summarize_loop(const std::vector<double>& t, const std::vector<double>& rho, const std::vector<double>& x,
                           const models::QuorumParams& quorum, double t_turn, double hold, double bin_width) {
  if (t.size() != rho.size() || t.size() != x.size() || t.size() < 2) {
    throw DomainError("summarize_loop: need matching series of at least two samples");
  }
  if (!(hold > 0.0) || !(bin_width > 0.0)) throw DomainError("summarize_loop: hold and bin_width must be positive");
  const double dt = t[1] - t[0];
  const auto hold_n = static_cast<std::size_t>(std::max(1.0, std::round(hold / dt)));
  std::vector<double> xu(t.size(), std::nan(""));
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto q = quorum;
    q.rho = rho[i];
    const auto eq = models::equilibria(models::RationalModel::quorum(q));
    if (eq.bistable()) xu[i] = eq.unstable();
  }
  // side: -1 below X_U, +1 above, 0 where X_U is undefined
  auto held = [&](std::size_t i, int side) {
    if (i + hold_n > t.size()) return false;
    for (std::size_t j = i; j < i + hold_n; ++j) {
      if (std::isnan(xu[j]) || side * (x[j] - xu[j]) <= 0.0) return false;
    }
    return true;
  };
  LoopSummary out;
  std::size_t collapse_at = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (held(i, -1)) {
      out.collapse_rho = rho[i];
      collapse_at = i;
      break;
    }
  }
  if (out.collapse_rho) {
    for (std::size_t i = collapse_at; i < t.size(); ++i) {
      if (t[i] >= t_turn && held(i, 1)) {
        out.recovery_rho = rho[i];
        out.width = *out.recovery_rho - *out.collapse_rho;
        break;
      }
    }
  }
  std::map<long, std::pair<double, std::size_t>> down, up;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto& e = (t[i] < t_turn ? down : up)[std::lround(std::floor(rho[i] / bin_width))];
    e.first += x[i];
    ++e.second;
  }
  for (const auto& [bin, d] : down) {
    const auto it = up.find(bin);
    if (it == up.end()) continue;
    out.area += std::fabs(d.first / static_cast<double>(d.second) -
                          it->second.first / static_cast<double>(it->second.second)) *
                bin_width;
  }
  return out;
}

json run_experiment(const Experiment& experiment) {
  const auto started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir(experiment.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + experiment.out);
  Artifacts out(dir);

  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, SimulateSpec>) run_simulate(experiment, spec, out);
        if constexpr (std::is_same_v<T, StochasticSpec>) run_stochastic(experiment, spec, out);
        if constexpr (std::is_same_v<T, LandscapeSpec>) run_landscape(experiment, spec, out);
        if constexpr (std::is_same_v<T, PulseSpec>) run_pulse(experiment, spec, out);
        if constexpr (std::is_same_v<T, EnsembleSpec>) run_ensemble(experiment, spec, out);
        if constexpr (std::is_same_v<T, FitSpec>) run_fit(experiment, spec, out);
        if constexpr (std::is_same_v<T, AbmSpec>) run_abm(experiment, spec, out);
        if constexpr (std::is_same_v<T, HysteresisSpec>) run_hysteresis(experiment, spec, out);
      },
      experiment.spec);

  json manifest;
  manifest["kind"] = experiment.kind;
  manifest["seed"] = experiment.seed;
  manifest["threads"] = experiment.threads;
  manifest["config"] = experiment.resolved;
  manifest["versions"] = versions();
  manifest["artifacts"] = out.listing();
  manifest["timing"] = {{"started", started},
                        {"finished", utc_now()},
                        {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  write_json(manifest, (dir / "manifest.json").string());
  return manifest;
}

}  // namespace fracland::cli
