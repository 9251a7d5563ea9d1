#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fracland/fde/volterra.hpp"
#include "fracland/fitting/fitting.hpp"
#include "fracland/models/equilibria.hpp"
#include "fracland/models/rational_model.hpp"
#include "fracland/models/schedule.hpp"
#include "fracland/perturbation/ensemble.hpp"
#include "fracland/stochastic/sde.hpp"
#include "fracland/stochastic/switching.hpp"
#include "fracland_cli/config.hpp"
#include "json.hpp"

namespace fracland::cli {

inline const std::vector<std::string> kExperimentKinds{"simulate", "stochastic", "landscape", "pulse",
                                                       "ensemble", "fit",        "abm",       "hysteresis"};

struct FieldInfo {
  std::string name;  ///< dotted path
  bool required = false;
  std::string description;
};

struct ExperimentInfo {
  std::string kind;
  std::string summary;
  std::vector<FieldInfo> fields;
};

/// Catalog of experiment kinds and their config fields.
[[nodiscard]] std::vector<ExperimentInfo> list_experiments();

struct SimulateSpec {
  models::RationalModel model = models::RationalModel::cubic(0.0, 1.0, 0.0, -1.0);
  std::vector<double> alphas{1.0};
  double x0 = 0.0;
  double t0 = 0.0;
  double t_end = 0.0;
  double h = 0.01;
  std::optional<models::ParameterSchedule> schedule;
  std::optional<stochastic::NoiseSpec> noise;
  fde::SolverOptions solver;
  std::size_t sample_every = 1;
};

struct LandscapeSpec {
  models::RationalModel model = models::RationalModel::cubic(0.0, 1.0, 0.0, -1.0);
  std::vector<double> alphas{1.0, 0.8};
  double h = 0.01;
  double t_end = 100.0;
  double epsilon_fraction = 1e-3;
  fde::SolverOptions solver;
};

struct EnsembleSpec {
  std::size_t n = 200;
  models::EnsembleBounds bounds;
  perturbation::EnsembleOptions options;
};

struct PulseSpec {
  models::RationalModel model = models::RationalModel::herbivory({0.8, 3.0, 0.2, 0.6});
  std::vector<double> alphas{1.0, 0.8};
  std::string parameter = "B";
  double magnitude = 0.12;
  double t_on = 10.0;
  double t_off = 20.0;
  double t_end = 620.0;
  double h = 0.01;
  std::size_t sample_every = 100;
  bool resistance = true;
  perturbation::PulseTemplate pulse;
  double lo = 0.0;
  double hi = 1.0;
  double tolerance = 5e-4;
  fde::SolverOptions solver;
};

struct StochasticSpec {
  models::RationalModel model = models::RationalModel::cubic(0.0, 1.0, 0.0, -1.0);
  std::vector<double> alphas{1.0, 0.7};
  stochastic::NoiseSpec noise;
  double x0 = 1.0;
  double t_end = 1000.0;
  double h = 0.01;
  double burn_in = 100.0;
  std::size_t replicates = 1;
  std::vector<std::size_t> block_sizes{1, 5, 10, 20, 50, 100, 150, 200};
  /// tau_int of the block-mean series for each of these block sizes.
  std::vector<std::size_t> tau_blocks{1, 50, 100, 150, 200};
  double tau_window = 20.0;
  double acf_max_lag = 10.0;  ///< time units
  stochastic::CommitRule commit;
  std::size_t psd_segment = 0;  ///< 0: default_segment
  double psd_overlap = 0.75;
  double survival_t_max = 600.0;
  double survival_step = 10.0;
  std::size_t trajectory_every = 0;  ///< 0: no trajectory file
  fde::SolverOptions solver;
};

struct FitSpec {
  models::HerbivoryParams truth{0.8, 6.0, 0.2, 0.0};
  double alpha = 0.8;
  std::vector<double> b_values;
  fitting::DatasetOptions dataset;
  fitting::FitGuess guess;
  fitting::FitOptions options;
  bool two_pulse = true;
  fitting::TwoPulseSetup two_pulse_setup;
  double b_hi = 2.5;
};

struct AbmSpec {
  std::uint64_t geometry_seed = 123;
  int free_side = 28;
  int porous_side = 30;
  std::size_t obstacles = 116;
  std::size_t agents = 8;
  double r = 0.2;
  std::optional<double> K;
  double crowding = 0.1;
  int radius = 2;
  int trap_steps = 5;
  int steps = 300;
  double fraction = 0.9;
  std::vector<std::uint64_t> t90_seeds;  ///< one open/porous pair per seed
  bool restart = true;
  int restart_step = 35;
  std::size_t replicates = 300;
  std::vector<int> horizons{10, 25, 50, 265};
  std::uint64_t baseline_seed = 0;
  std::uint64_t snapshot_seed = 0;
  std::uint64_t macro_seed = 0;
  bool msd = true;
  int fit_lo = 10;
  int fit_hi = 100;
  bool write_positions = false;
};

struct HysteresisSpec {
  models::QuorumParams quorum{3.0, 1.0, 0.05, 0.38};
  std::vector<double> alphas{1.0, 0.75};
  double rho_high = 0.38;
  double rho_low = 0.29;
  double t_turn = 250.0;
  double t_end = 1000.0;
  double h = 0.01;
  double x_init = 1.5;
  double rhs_std = 1.2;  ///< std of the white forcing added to the right-hand side
  double hold = 10.0;
  double bin_width = 0.0025;
  double sample_interval = 1.0;
  std::size_t replicates = 10;  ///< noise seeds seed, seed + 1, ...
  fde::SolverOptions solver;
};

using ExperimentSpec = std::variant<SimulateSpec, StochasticSpec, LandscapeSpec, PulseSpec, EnsembleSpec, FitSpec,
                                    AbmSpec, HysteresisSpec>;

/// Command-line values that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

struct Experiment {
  std::string kind;
  std::uint64_t seed = 1;
  std::string out = "out";
  unsigned threads = 1;
  ExperimentSpec spec;
  nlohmann::json resolved;  ///< every setting after defaults and overrides
  std::string source;
};

/// Validates the whole config before any computation. `expected_kind` is the
/// subcommand; a config `kind` must agree with it. Throws ConfigError.
[[nodiscard]] Experiment parse_experiment(const ConfigDocument& doc, const Overrides& overrides = {},
                                          const std::optional<std::string>& expected_kind = std::nullopt);

/// Runs the pipeline, writes artifacts and manifest.json into experiment.out and
/// returns the manifest.
nlohmann::json run_experiment(const Experiment& experiment);

/// Hex SHA-256 of a file.
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// Collapse and recovery of one noisy loop. A crossing of the unstable branch
/// X_U(rho) counts once the state stays on the far side for `hold` time units;
/// recovery is looked for from t_turn on.
struct LoopSummary {
  std::optional<double> collapse_rho;
  std::optional<double> recovery_rho;
  std::optional<double> width;  ///< recovery_rho - collapse_rho
  double area = 0.0;            ///< sum over rho bins of |mean x before t_turn - mean x after| * bin_width
};
[[nodiscard]] LoopSummary summarize_loop(const std::vector<double>& t, const std::vector<double>& rho,
                                         const std::vector<double>& x, const models::QuorumParams& quorum,
                                         double t_turn, double hold, double bin_width);

}  // namespace fracland::cli
