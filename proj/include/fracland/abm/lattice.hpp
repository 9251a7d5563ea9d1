#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracland::abm {

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct LatticeConfig {
  int width = 28;
  int height = 28;
  std::vector<Cell> obstacles;
  std::vector<Cell> agents;  ///< initial positions
  double r = 0.2;
  double K = 784.0;  ///< default: every cell of the default lattice
  double crowding = 0.1;
  int crowding_radius = 2;  ///< Chebyshev radius of the local count
  int trap_steps = 5;
  int steps = 300;
  bool record_positions = false;

  /// Throws ConfigError on overlaps, cells off the lattice or K above the free-cell count.
  void validate() const;
  [[nodiscard]] std::size_t free_cells() const;
};

/// Microstate of one agent.
struct Agent {
  Cell pos;
  Cell origin;
  int born = 0;           ///< step of birth, 0 for initial agents
  int trap = 0;           ///< remaining trapped steps
  bool adjacent = false;  ///< on a cell next to an obstacle; trapping re-arms only after leaving
};

struct LatticeState {
  int step = 0;
  std::vector<Agent> agents;
};

struct LatticeRun {
  std::uint64_t seed = 0;
  std::vector<std::size_t> N;                  ///< N[t], t = 0..steps
  std::vector<std::vector<Cell>> positions;    ///< per step, indexed by agent, when recorded
  std::vector<int> trapped_steps;              ///< per agent total steps spent trapped
  LatticeState final_state;
  std::vector<LatticeState> snapshots;         ///< states at requested steps
};

/// Sequential update per step: shuffled order; trapped agents count down and do
/// nothing else; others move to a uniformly chosen free von Neumann neighbour
/// (if any) and then give birth into a free neighbour with probability
/// r (1 - N/K) exp(-crowding * n_local). Entering a cell next to an obstacle
/// (by moving or birth) traps the agent for trap_steps.
[[nodiscard]] LatticeRun run_lattice(const LatticeConfig& config, std::uint64_t seed,
                                     const std::vector<int>& snapshot_steps = {});

/// Continues from `state` for config.steps - state.step steps.
[[nodiscard]] LatticeRun continue_lattice(const LatticeConfig& config, const LatticeState& state, std::uint64_t seed);

/// Random obstacle mask avoiding `keep`.
[[nodiscard]] std::vector<Cell> random_obstacles(int width, int height, std::size_t count, std::uint64_t seed,
                                                 const std::vector<Cell>& keep = {});

/// Paired geometries: an obstacle-free free_side x free_side lattice and a porous
/// lattice whose free-cell count matches, both with the same initial agents inside
/// the shared free_side x free_side corner. K is set to the smaller free-cell count.
struct PairedGeometry {
  LatticeConfig open;
  LatticeConfig porous;
};
[[nodiscard]] PairedGeometry paired_geometry(std::uint64_t seed, int free_side = 28, int porous_side = 30,
                                             std::size_t obstacles = 116, std::size_t agents = 8);

/// First step with N >= fraction * K; nullopt if never reached.
[[nodiscard]] std::optional<int> time_to_fraction(const LatticeRun& run, double K, double fraction = 0.9);

struct MsdCurve {
  std::vector<int> lag;
  std::vector<double> msd;
  std::vector<std::size_t> agents;  ///< agents contributing at each lag
  std::optional<double> exponent;   ///< log-log slope over the fit window
  std::string note;
};

/// Squared displacement from the birth cell against age, averaged over agents
/// (and over runs when several are given). Needs recorded positions.
[[nodiscard]] MsdCurve msd(const std::vector<LatticeRun>& runs, int fit_lo, int fit_hi);

struct KsResult {
  double D = 0.0;
  double p = 1.0;
};

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value
/// Q(lambda), lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) D, ne = nm / (n + m).
[[nodiscard]] KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
/// 2 sum_{k=1}^{100} (-1)^(k-1) exp(-2 k^2 lambda^2), clamped to [0, 1].
[[nodiscard]] double kolmogorov_q(double lambda);

enum class RestartMode { kSnapshot, kMacroMatched };

struct RestartEnsemble {
  RestartMode mode = RestartMode::kSnapshot;
  int restart_step = 0;
  std::vector<std::vector<std::size_t>> N;  ///< [replicate][horizon], horizon 0 is the restart
  [[nodiscard]] std::vector<double> at(int horizon) const;
  [[nodiscard]] double mean(int horizon) const;
  /// Central 95% band (2.5% and 97.5% quantiles).
  [[nodiscard]] std::pair<double, double> band(int horizon) const;
};

/// R continuations of `state` with seeds derived from `seed`. Macro-matched mode
/// keeps only N: positions drawn uniformly over free cells, trap timers reset.
/// Throws ConfigError when N exceeds the free cells or replicates < 2.
[[nodiscard]] RestartEnsemble restart_experiment(const LatticeConfig& config, const LatticeState& state,
                                                 std::size_t replicates, RestartMode mode, std::uint64_t seed);

struct RestartComparison {
  std::vector<int> horizons;
  std::vector<KsResult> ks;
};
[[nodiscard]] RestartComparison compare_restarts(const RestartEnsemble& a, const RestartEnsemble& b,
                                                 const std::vector<int>& horizons);

/// Seed of replicate i derived from a base seed (SplitMix64).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i);

void write_population_csv(const std::vector<const LatticeRun*>& runs, const std::vector<std::string>& labels,
                          const std::string& path);
void write_positions_csv(const LatticeRun& run, const std::string& path);

}  // namespace fracland::abm
