#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fracland/fde/caputo.hpp"
#include "fracland/models/rational_model.hpp"
#include "fracland/util/lsq.hpp"

namespace fracland::fitting {

/// Open bistable window (rA, r (K + A)^2 / (4K)) of the herbivory model in B.
/// Empty (lower >= upper) when K <= A.
struct BistableWindow {
  double lower = 0.0;
  double upper = 0.0;
  [[nodiscard]] bool contains(double B) const noexcept { return B > lower && B < upper; }
};
[[nodiscard]] BistableWindow herbivory_window(double r, double K, double A);

struct FitRun {
  double B = 0.0;
  double x0 = 0.0;
  std::vector<double> t;
  std::vector<double> x;
};

struct FitDataset {
  double alpha = 1.0;
  models::HerbivoryParams truth;  ///< B unused; each run carries its own
  std::vector<FitRun> runs;
  [[nodiscard]] std::size_t n_points() const;
};

struct DatasetOptions {
  double t_end = 100.0;
  std::size_t samples = 200;  ///< uniform data times per run, t = 0 excluded
  /// Initial offsets from X_U as a fraction of the distance to the stable state on that side.
  double epsilon = 0.01;
  double h = 0.01;
  fde::SolverOptions solver{.history = fde::HistoryMethod::kFft};
};

/// Memory-free integration of the herbivory ODE with piecewise-constant B,
/// sampled at increasing `times` (all > t0). Adaptive Dormand-Prince 5(4).
struct OdeTolerance {
  double rel = 1e-10;
  double abs = 1e-12;
};
struct BSegment {
  double t_end = 0.0;  ///< B applies up to here
  double B = 0.0;
};
[[nodiscard]] std::vector<double> integrate_memory_free(double r, double K, double A,
                                                        const std::vector<BSegment>& segments, double x0,
                                                        double t0, const std::vector<double>& times,
                                                        const OdeTolerance& tol = {});

/// Deterministic runs from X_U(B) -/+ epsilon for every B. Order 1 uses the ODE
/// integrator, fractional orders the Caputo solver at options.h.
/// Throws ConfigError for B outside the bistable window.
[[nodiscard]] FitDataset generate_dataset(const models::HerbivoryParams& truth, fde::MemoryOrder order,
                                          const std::vector<double>& b_values, const DatasetOptions& options = {});

struct FitBounds {
  double r_lo = 0.05, r_hi = 5.0;
  double K_lo = 1.0, K_hi = 10.0;
  double A_lo = 0.01, A_hi = 1.0;
  double B_lo = 0.01, B_hi = 2.0;
};

struct FitGuess {
  double r = 0.8;
  double K = 6.0;
  double A = 0.2;
  std::vector<double> B;  ///< empty: the dataset B values
};

struct FitOptions {
  FitBounds bounds;
  util::LsqOptions lsq{.max_iter = 300, .ftol = 1e-14, .xtol = 1e-12, .gtol = 1e-14};
  OdeTolerance ode;
  /// Per-run residual weights; empty means unweighted.
  std::vector<double> run_weights;
  /// Residual added per B outside the fitted bistable window, times the distance.
  double penalty_weight = 10.0;
  unsigned threads = 1;
};

struct FitResult {
  double r = 0.0;
  double K = 0.0;
  double A = 0.0;
  std::vector<double> B;      ///< one per distinct dataset B, in first-seen order
  std::vector<std::size_t> run_b;  ///< index into B for each dataset run
  double residual_norm = 0.0;  ///< |r| of the data residuals, penalty excluded
  double initial_residual_norm = 0.0;
  double rmse = 0.0;  ///< per data point
  FitBounds bounds;
  int iterations = 0;
  int evaluations = 0;
  int penalized_evaluations = 0;
  bool converged = false;
  bool bistable = false;  ///< every fitted B inside the fitted window
  std::string status;
};

/// Memory-free (alpha = 1) least-squares fit of (r, K, A, B_1..B_n) to all runs.
/// Throws FitError on an infeasible or out-of-bounds guess.
[[nodiscard]] FitResult fit_memory_free(const FitDataset& data, const FitGuess& guess = {},
                                        const FitOptions& options = {});

struct FoldReport {
  std::optional<double> lower;
  std::optional<double> upper;
  [[nodiscard]] std::optional<double> interval() const;
};

struct BifurcationComparison {
  double alpha = 1.0;
  FoldReport truth;
  FoldReport fitted;
  std::optional<double> upper_shift;  ///< fitted - true
  bool shrunk = false;                ///< fitted bistable interval strictly shorter
  bool structural_mismatch = false;   ///< a sweep found fewer than two folds
  std::string message;
};

/// Folds in B of both models from equilibrium sweeps over [b_lo, b_hi]. Equilibria
/// do not depend on alpha; it is carried for labelling.
[[nodiscard]] BifurcationComparison compare_bifurcations(const models::HerbivoryParams& truth, double alpha,
                                                         const models::HerbivoryParams& fitted, double b_lo = 0.0,
                                                         double b_hi = 2.5, std::size_t resolution = 2501);

struct TwoPulseSetup {
  double base_B = 1.2;
  double offset1 = 1.0;  ///< B lowered by this on the first window
  double offset2 = 1.5;
  double on1 = 20.0, off1 = 30.0;
  double on2 = 100.0, off2 = 110.0;
  double t_end = 200.0;
  std::size_t samples = 400;
  double h = 0.01;
};

struct TwoPulseResult {
  double base_B_fit = 0.0;
  double inferred1 = 0.0;
  double inferred2 = 0.0;
  double rmse = 0.0;
  FitRun data;
  std::vector<double> fitted_x;
};

/// Data from the true model at X_S2(base_B) with two downward pulses on B; the
/// memory-free model keeps the fitted (r, K, A) and the fitted B of base_B
/// (linear in the dataset map) and infers both offsets.
[[nodiscard]] TwoPulseResult two_pulse_inference(const models::HerbivoryParams& truth, fde::MemoryOrder order,
                                                 const FitDataset& data, const FitResult& fit,
                                                 const TwoPulseSetup& setup = {}, const FitOptions& options = {});

void write_dataset_csv(const FitDataset& data, const std::string& path);
void write_fit_json(const FitResult& fit, const BifurcationComparison& cmp, const std::string& path);

}  // namespace fracland::fitting
