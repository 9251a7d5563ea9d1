// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "fracland/abm/lattice.hpp"
#include "fracland/fde/caputo.hpp"
#include "fracland/fde/mittag_leffler.hpp"
#include "fracland/fitting/fitting.hpp"
#include "fracland/landscape/landscape.hpp"
#include "fracland/models/equilibria.hpp"
#include "fracland/perturbation/ensemble.hpp"
#include "fracland/perturbation/metrics.hpp"
#include "fracland/stochastic/sde.hpp"
#include "fracland/stochastic/spectral.hpp"
#include "fracland/stochastic/stationary.hpp"
#include "fracland/stochastic/switching.hpp"
#include "fracland/util/stats.hpp"
#include "fracland_cli/config.hpp"
#include "fracland_cli/experiments.hpp"

namespace {

using namespace fracland;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget;  ///< seconds
  std::function<Outcome()> run;
};

fde::SolverOptions fft_solver() {
  fde::SolverOptions o;
  o.history = fde::HistoryMethod::kFft;
  return o;
}

bool within(double value, double target, double tol) { return std::fabs(value - target) <= tol; }
bool within_rel(double value, double target, double rel) { return std::fabs(value - target) <= rel * std::fabs(target); }

const models::RationalModel kDoubleWell = models::RationalModel::cubic(0.0, 1.0, 0.0, -1.0);

Outcome solver_correctness() {
  const auto decay = models::RationalModel::cubic(0.0, -2.0, 0.0, 0.0);
  const fde::SolverGrid grid(0.0, 5.0, 1e-3);
  double worst = 0.0;
  std::string detail;
  for (double a : {0.6, 0.8, 1.0}) {
    const auto tr = fde::solve_caputo(decay, std::nullopt, fde::MemoryOrder(a), 1.0, grid);
    double err = 0.0;
    for (std::size_t n = 0; n < tr.t.size(); ++n) {
      const double exact = fde::mittag_leffler(a, -2.0 * std::pow(tr.t[n], a));
      err = std::max(err, std::fabs(tr.x[n] - exact));
    }
    worst = std::max(worst, err);
    detail += fmt::format("alpha={} err={:.2e} ", a, err);
  }
  return {worst < 1e-4, detail + "(limit 1e-4)"};
}

Outcome landscape_oracle() {
  const auto eq = models::equilibria(kDoubleWell);
  auto setup = landscape::default_setup(eq, 0.01, 100.0);
  setup.h = landscape::landscape_step(kDoubleWell, setup.x_lo, setup.x_hi, 0.01);
  setup.solver = fft_solver();
  const auto profile = landscape::model_landscape(kDoubleWell, fde::MemoryOrder(1.0), setup);
  const auto V = landscape::analytic_potential(kDoubleWell);
  const double v0 = V(profile.anchor);
  double gap = 0.0;
  for (std::size_t k = 0; k < profile.x.size(); ++k) {
    gap = std::max(gap, std::fabs(profile.V[k] - (V(profile.x[k]) - v0)));
  }
  const auto basin = landscape::basin_metrics(profile);
  const double curv = std::fabs(basin.curvature);
  return {gap < 1e-2 && within(curv, 2.0, 0.05),
          fmt::format("sup gap {:.2e} (limit 1e-2), |V''(x*)| {:.4f} at x*={:.4f} (2 +- 0.05)", gap, curv,
                      basin.minimum)};
}

struct EnsembleRun {
  std::vector<perturbation::EnsembleRecord> records;
  double seconds = 0.0;
};

const EnsembleRun& ensemble_run(unsigned threads) {
  static std::optional<EnsembleRun> cache;
  if (!cache) {
    const auto t0 = Clock::now();
    const auto ms = models::sample_ensemble(200, 20261016);
    perturbation::EnsembleOptions opt;
    opt.alphas = {1.0, 0.8};
    opt.threads = threads;
    EnsembleRun r;
    r.records = perturbation::ensemble_study(ms, opt);
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    cache = std::move(r);
  }
  return *cache;
}

Outcome flattening(unsigned threads) {
  const auto& run = ensemble_run(threads);
  std::size_t flatter = 0;
  const std::size_t n = run.records.size();
  for (const auto& r : run.records) {
    const auto& a = r.entries[0].basin;
    const auto& b = r.entries[1].basin;
    if (a && b && std::fabs(b->curvature) < std::fabs(a->curvature)) ++flatter;
  }
  return {flatter >= static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n))),
          fmt::format("flatter with memory in {}/{} models (need 99%), ensemble {:.0f} s", flatter, n, run.seconds)};
}

Outcome ensemble_directions(unsigned threads) {
  const auto& run = ensemble_run(threads);
  const std::size_t n = run.records.size();
  std::size_t res_neg = 0, rst_pos = 0;
  std::vector<double> depth, flatness;
  for (const auto& r : run.records) {
    if (auto v = r.relative_resilience(1); v && *v < 0.0) ++res_neg;
    if (auto v = r.relative_resistance(1); v && *v > 0.0) ++rst_pos;
    for (const auto& en : r.entries) {
      if (en.basin && en.basin->flatness) {
        depth.push_back(en.basin->depth);
        flatness.push_back(*en.basin->flatness);
      }
    }
  }
  const double rho = util::spearman(depth, flatness);
  const auto nd = static_cast<double>(n);
  const bool pass = static_cast<double>(res_neg) >= 0.99 * nd && static_cast<double>(rst_pos) >= 0.95 * nd && rho < 0.0;
  return {pass, fmt::format("resilience effect < 0 in {}/{} (99%), resistance effect > 0 in {}/{} (95%), "
                            "spearman(depth, flatness) {:.3f} over {} basins, ensemble run shared with criterion 3 ({:.0f} s)",
                            res_neg, n, rst_pos, n, rho, depth.size(), run.seconds)};
}

struct PulseCase {
  models::HerbivoryParams params;
  double magnitude;
};

std::pair<double, double> recovery_pair(const PulseCase& c) {
  const auto m = models::RationalModel::herbivory(c.params);
  const double t_end = 620.0;
  const auto pulse = models::ParameterSchedule::pulse("B", c.params.B, c.magnitude, 10.0, 20.0, 0.0, t_end);
  const fde::SolverGrid grid(0.0, t_end, 0.01);
  double v[2];
  int i = 0;
  for (double a : {1.0, 0.8}) {
    const auto r = perturbation::resilience_index(m, fde::MemoryOrder(a), pulse, grid, fft_solver());
    if (!r.recovered) throw MetricError(fmt::format("no recovery at alpha={}", a));
    v[i++] = r.value;
  }
  return {v[0], v[1]};
}

Outcome resilience_numbers() {
  const auto [s4_free, s4_mem] = recovery_pair({{0.8, 3.0, 0.2, 0.6}, 0.12});
  const auto [s5_free, s5_mem] = recovery_pair({{80.0, 3.0, 0.2, 60.0}, 8.0});
  const double s4_rel = perturbation::relative_effect(s4_mem, s4_free);
  const double s5_rel = perturbation::relative_effect(s5_mem, s5_free);
  const bool pass = within_rel(s4_free, 0.0295, 0.15) && within_rel(s4_mem, 0.0031, 0.15) &&
                    within(s4_rel, -0.8088, 0.05) && within(s5_rel, -0.9622, 0.05);
  return {pass, fmt::format("small herbivory: {:.4f} vs {:.4f} (0.0295, 0.0031 +-15%), effect {:.4f} (-0.8088 +- 0.05); "
                            "fast herbivory: {:.4f} vs {:.4f}, effect {:.4f} (-0.9622 +- 0.05)",
                            s4_free, s4_mem, s4_rel, s5_free, s5_mem, s5_rel)};
}

Outcome resistance_numbers() {
  struct Case {
    models::HerbivoryParams params;
    double hi;
    double target;
  };
  const std::vector<Case> cases{{{80.0, 3.0, 0.2, 60.0}, 40.0, 0.0370}, {{0.8, 3.0, 0.2, 0.6}, 1.0, 0.0880}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto m = models::RationalModel::herbivory(c.params);
    perturbation::PulseTemplate pt;
    pt.parameter = "B";
    double p[2];
    double width = 0.0;
    int i = 0;
    for (double a : {1.0, 0.8}) {
      const auto r = perturbation::resistance_search(m, fde::MemoryOrder(a), pt, 0.0, c.hi, 5e-4, fft_solver());
      width = std::max(width, r.bracket_width());
      p[i++] = r.p_star;
    }
    const double diff = p[1] - p[0];
    const double rel = perturbation::relative_effect(p[1], p[0]);
    pass = pass && within_rel(diff, c.target, 0.2) && width <= 5e-4 && rel > 0.0;
    detail += fmt::format("r={} B={}: P* {:.5f} -> {:.5f}, diff {:.4f} ({} +-20%), effect {:.4f}, bracket {:.1e}; ",
                          c.params.r, c.params.B, p[0], p[1], diff, c.target, rel, width);
  }
  return {pass, detail};
}

Outcome spectral_theory() {
  const auto ou = models::RationalModel::cubic(0.0, -2.0, 0.0, 0.0);
  const double lambda = 2.0, sigma = 0.1;
  const double plateau = sigma * sigma / (lambda * lambda);
  const fde::SolverGrid grid(0.0, 1000.0, 0.01);
  bool pass = true;
  std::string detail;
  for (double a : {0.7, 1.0}) {
    stochastic::NoiseSpec noise{.sigma = sigma, .seed = 1};
    const auto tr = stochastic::simulate_sde(ou, fde::MemoryOrder(a), noise, 0.0, grid, fft_solver());
    const auto x = stochastic::after_burn_in(tr, 100.0);
    const auto psd = stochastic::welch_psd(x, grid.h());
    const auto fit = stochastic::fit_fou_spectrum(psd, 50.0);
    const double raw = stochastic::loglog_slope(psd.omega, psd.S, 10.0, 50.0);
    pass = pass && within_rel(fit.plateau(), plateau, 0.2) && within(fit.tail_slope(), -2.0 * a, 0.2);
    detail += fmt::format("alpha={}: plateau {:.5f} (2.5e-3 +-20%), tail slope {:.3f} ({} +- 0.2), "
                          "raw slope [10,50] {:.3f}, segment {}; ",
                          a, fit.plateau(), fit.tail_slope(), -2.0 * a, raw, psd.segment);
  }
  return {pass, detail};
}

Outcome variance_crossover() {
  const fde::SolverGrid grid(0.0, 1000.0, 0.01);
  const std::vector<std::size_t> ms{1, 5, 10, 20, 50, 100, 150, 200};
  const std::vector<std::size_t> tau_ms{50, 100, 150, 200};
  const double window = 20.0;
  int good = 0;
  std::string flags;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto path = stochastic::noise_path(grid.n_steps(), seed);
    std::vector<std::vector<double>> xs;
    for (double a : {1.0, 0.7}) {
      stochastic::NoiseSpec noise{.sigma = 0.1, .seed = seed};
      const auto tr = stochastic::simulate_sde(kDoubleWell, fde::MemoryOrder(a), noise, 1.0, grid, fft_solver(), path);
      xs.push_back(stochastic::after_burn_in(tr, 100.0));
    }
    const auto v1 = stochastic::block_variance(xs[0], ms);
    const auto v7 = stochastic::block_variance(xs[1], ms);
    bool crosses = false;
    for (std::size_t i = 1; i < ms.size(); ++i) crosses = crosses || v7[i] < v1[i];
    bool tau = true;
    for (std::size_t m : tau_ms) {
      const auto b1 = stochastic::block_means(xs[0], m);
      const auto b7 = stochastic::block_means(xs[1], m);
      const double hb = grid.h() * static_cast<double>(m);
      const auto lag = static_cast<std::size_t>(window / hb);
      const double t1 = stochastic::correlation_stats(b1, hb, lag, window).tau_int;
      const double t7 = stochastic::correlation_stats(b7, hb, lag, window).tau_int;
      tau = tau && t7 > t1;
    }
    const bool ok = v7[0] > v1[0] && crosses && tau;
    good += ok;
    flags += ok ? '+' : '-';
  }
  return {good >= 8, fmt::format("{}/10 seeds show all three (need 8), per seed {}", good, flags)};
}

Outcome committed_switching() {
  const fde::SolverGrid grid(0.0, 5000.0, 0.01);
  const int seeds = 10;
  bool bounded = true;
  int longer = 0;
  std::vector<double> pool1, pool7;
  for (std::uint64_t seed = 1; seed <= static_cast<std::uint64_t>(seeds); ++seed) {
    const auto path = stochastic::noise_path(grid.n_steps(), seed);
    double mean[2];
    int i = 0;
    for (double a : {1.0, 0.7}) {
      stochastic::NoiseSpec noise{.sigma = 0.34, .seed = seed};
      const auto tr = stochastic::simulate_sde(kDoubleWell, fde::MemoryOrder(a), noise, 1.0, grid, fft_solver(), path);
      const auto rec = stochastic::detect_committed(tr.x, grid.h());
      bounded = bounded && rec.transitions() <= stochastic::zero_crossings(tr.x);
      mean[i] = stochastic::dwell_summary(rec.dwells).mean;
      auto& pool = i == 0 ? pool1 : pool7;
      pool.insert(pool.end(), rec.dwells.begin(), rec.dwells.end());
      ++i;
    }
    longer += mean[1] > mean[0];
  }
  bool above = true;
  std::string worst;
  double worst_gap = std::numeric_limits<double>::infinity();
  for (double t = 100.0; t <= 400.0; t += 10.0) {
    const double s1 = stochastic::survival(pool1, t);
    const double s7 = stochastic::survival(pool7, t);
    above = above && s7 > s1;
    if (s7 - s1 < worst_gap) {
      worst_gap = s7 - s1;
      worst = fmt::format("t={:.0f}: {:.3f} vs {:.3f}", t, s7, s1);
    }
  }
  const bool pass = bounded && 2 * longer > seeds && above;
  return {pass, fmt::format("committed <= crossings: {}; longer mean dwell with memory in {}/{}; pooled survival "
                            "above on [100,400]: {} (closest {}; dwells {} / {})",
                            bounded ? "all" : "no", longer, seeds, above ? "yes" : "no", worst, pool7.size(),
                            pool1.size())};
}

Outcome stationary_density() {
  const double sigma = 0.5;
  const fde::SolverGrid grid(0.0, 20000.0, 0.01);
  stochastic::NoiseSpec noise{.sigma = sigma, .seed = 1};
  const auto tr = stochastic::simulate_sde(kDoubleWell, fde::MemoryOrder(1.0), noise, 1.0, grid);
  const auto x = stochastic::after_burn_in(tr, 100.0);
  const auto check = stochastic::stationary_density_check(x, fde::MemoryOrder(1.0), kDoubleWell, sigma);
  return {check.distance < 0.05,
          fmt::format("sup CDF distance {:.4f} (limit 0.05), sigma {}, {} samples", check.distance, sigma, x.size())};
}

Outcome fitting_bias() {
  const models::HerbivoryParams truth{0.8, 6.0, 0.2, 0.0};
  std::vector<double> bs;
  for (int i = 2; i <= 12; ++i) bs.push_back(i / 10.0);
  const auto data = fitting::generate_dataset(truth, fde::MemoryOrder(0.8), bs);
  const auto fit = fitting::fit_memory_free(data);
  const auto cmp = fitting::compare_bifurcations(truth, 0.8, {fit.r, fit.K, fit.A, 0.0});
  const double fitted_fold = cmp.fitted.upper.value_or(NAN);
  const double true_fold = cmp.truth.upper.value_or(NAN);

  const auto self = fitting::generate_dataset(truth, fde::MemoryOrder(1.0), bs);
  fitting::FitGuess guess{0.84, 5.7, 0.21, {}};
  for (double b : bs) guess.B.push_back(1.03 * b);
  const auto sf = fitting::fit_memory_free(self, guess);
  double self_err = std::max({std::fabs(sf.r - truth.r), std::fabs(sf.K - truth.K), std::fabs(sf.A - truth.A)});
  for (std::size_t j = 0; j < bs.size(); ++j) self_err = std::max(self_err, std::fabs(sf.B[j] - bs[j]));

  const bool pass = fit.rmse < 0.05 && within(fitted_fold, 0.8, 0.15) && within(true_fold, 1.2, 0.05) && cmp.shrunk &&
                    self_err < 1e-4;
  return {pass, fmt::format("rmse {:.4f} (< 0.05); fitted fold {:.4f} (0.8 +- 0.15); true fold {:.4f} (1.2 +- 0.05); "
                            "interval shorter: {}; fit r={:.4f} K={:.4f} A={:.4f}; self-fit max error {:.1e} (< 1e-4)",
                            fit.rmse, fitted_fold, true_fold, cmp.shrunk ? "yes" : "no", fit.r, fit.K, fit.A,
                            self_err)};
}

Outcome lattice_abm() {
  const auto g = abm::paired_geometry(123);
  const double K = g.open.K;
  int slower = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto a = abm::time_to_fraction(abm::run_lattice(g.open, seed), K);
    const auto b = abm::time_to_fraction(abm::run_lattice(g.porous, seed), K);
    slower += a && (!b || *b > *a);
  }
  const std::vector<int> horizons{265};
  double D[2];
  int i = 0;
  for (const auto* cfg : {&g.open, &g.porous}) {
    const auto base = abm::run_lattice(*cfg, 5, {35});
    const auto& state = base.snapshots.at(0);
    const auto snap = abm::restart_experiment(*cfg, state, 300, abm::RestartMode::kSnapshot, 11);
    const auto macro = abm::restart_experiment(*cfg, state, 300, abm::RestartMode::kMacroMatched, 12);
    D[i++] = abm::compare_restarts(snap, macro, horizons).ks.at(0).D;
  }
  const bool pass = slower >= 9 && D[0] < 0.2 && D[1] > 0.5;
  return {pass, fmt::format("porous reaches 90% of K later in {}/10 pairs (need 9); restart KS D at h=265: "
                            "open {:.3f} (< 0.2), porous {:.3f} (> 0.5)",
                            slower, D[0], D[1])};
}

std::string csv_body(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line, body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    body += line;
    body += '\n';
  }
  return body;
}

Outcome determinism(const fs::path& out) {
  const std::vector<std::pair<std::string, std::string>> configs{
      {"simulate", "kind: simulate\nalphas: [1.0, 0.8]\nx0: 0.01\ngrid: {t_end: 5}\nnoise: {sigma: 0.1}\n"},
      {"landscape", "kind: landscape\nmemory: [0, 0.2]\nt_end: 20\n"},
      {"ensemble", "kind: ensemble\nseed: 4\nn: 3\nmemory: [0, 0.2]\n"},
      {"pulse",
       "kind: pulse\nmodel: {type: herbivory, r: 80, K: 3, A: 0.2, B: 60}\n"
       "resilience: {parameter: B, magnitude: 8}\nresistance: {parameter: B, lo: 0, hi: 40}\n"},
      {"stochastic",
       "kind: stochastic\nalphas: [1.0, 0.7]\nnoise: {sigma: 0.3}\nt_end: 120\nburn_in: 20\nreplicates: 2\n"
       "block_sizes: [1, 10]\ntau_blocks: [1, 10]\ntau_window: 2\nacf_max_lag: 1\npsd: {segment: 1024}\n"
       "survival: {t_max: 20, step: 5}\ntrajectory_every: 10\n"},
      {"fit",
       "kind: fit\nB: [0.4, 0.8]\ndataset: {t_end: 20, samples: 40}\n"
       "two_pulse: {enabled: true, t_end: 150, samples: 150}\n"},
      {"abm", "kind: abm\nsteps: 80\nt90_seeds: [1, 2]\nrestart: {step: 20, replicates: 10, horizons: [10, 60]}\n"
              "msd: {fit_lo: 5, fit_hi: 40}\nwrite_positions: true\n"},
      {"hysteresis", "kind: hysteresis\nt_turn: 50\nt_end: 100\nreplicates: 2\n"},
  };
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& [kind, yaml] : configs) {
    std::vector<nlohmann::json> manifests;
    for (const char* tag : {"first", "second"}) {
      cli::Overrides ov;
      ov.out = (out / "determinism" / tag / kind).string();
      const auto e = cli::parse_experiment(cli::parse_yaml(yaml, kind + ".yaml"), ov, kind);
      manifests.push_back(cli::run_experiment(e));
    }
    for (const auto& a : manifests[0]["artifacts"]) {
      const auto name = a["path"].get<std::string>();
      if (fs::path(name).extension() != ".csv") continue;
      ++compared;
      const auto p1 = out / "determinism" / "first" / kind / name;
      const auto p2 = out / "determinism" / "second" / kind / name;
      if (!fs::exists(p2) || csv_body(p1) != csv_body(p2)) differing.push_back(kind + "/" + name);
    }
  }
  std::string detail = fmt::format("{} CSV files over {} experiment kinds", compared, configs.size());
  for (const auto& d : differing) detail += " differs: " + d;
  return {differing.empty() && compared > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--out", out, "directory for experiment artifacts");
  app.add_option("--only", only, "criterion numbers to run");
  app.add_option("--threads", threads, "worker threads for the ensemble")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "solver correctness", 10.0, solver_correctness},
      {2, "landscape oracle", 5.0, landscape_oracle},
      {3, "flattening law", 600.0, [&] { return flattening(threads); }},
      {4, "resilience numbers", 60.0, resilience_numbers},
      {5, "resistance numbers", 300.0, resistance_numbers},
      {6, "ensemble directions", 900.0, [&] { return ensemble_directions(threads); }},
      {7, "spectral theory", 120.0, spectral_theory},
      {8, "variance crossover", 300.0, variance_crossover},
      {9, "committed switching", 600.0, committed_switching},
      {10, "stationary density", 120.0, stationary_density},
      {11, "fitting bias", 600.0, fitting_bias},
      {12, "lattice model", 600.0, lattice_abm},
      {13, "determinism", 0.0, [&] { return determinism(out); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& err) {
      o = {false, std::string("error: ") + err.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    bool on_time = true;
    if (c.budget > 0.0 && secs > c.budget) {
      on_time = false;
      o.detail += fmt::format(" over the {:.0f} s budget", c.budget);
    }
    const bool pass = o.pass && on_time;
    failed += !pass;
    fmt::print("{} {:2d} {}: {} [{:.1f} s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail, secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
