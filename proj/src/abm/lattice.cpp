#include "fracland/abm/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "fracland/errors.hpp"
#include "fracland/util/csv.hpp"
#include "fracland/util/stats.hpp"

namespace fracland::abm {

namespace {

constexpr int kEmpty = -1;
constexpr int kObstacle = -2;
constexpr std::array<std::array<int, 2>, 4> kVonNeumann{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

bool on_lattice(const LatticeConfig& c, Cell p) { return p.x >= 0 && p.y >= 0 && p.x < c.width && p.y < c.height; }

class Lattice {
 public:
  Lattice(const LatticeConfig& c) : c_(c), cells_(static_cast<std::size_t>(c.width * c.height), kEmpty) {
    for (const auto& o : c.obstacles) at(o) = kObstacle;
  }

  int& at(Cell p) { return cells_[static_cast<std::size_t>(p.y * c_.width + p.x)]; }
  [[nodiscard]] int get(Cell p) const { return cells_[static_cast<std::size_t>(p.y * c_.width + p.x)]; }

  [[nodiscard]] bool free(Cell p) const { return on_lattice(c_, p) && get(p) == kEmpty; }

  [[nodiscard]] bool next_to_obstacle(Cell p) const {
    for (const auto& d : kVonNeumann) {
      const Cell q{p.x + d[0], p.y + d[1]};
      if (on_lattice(c_, q) && get(q) == kObstacle) return true;
    }
    return false;
  }

  /// Free von Neumann neighbours in fixed order.
  [[nodiscard]] std::vector<Cell> free_neighbours(Cell p) const {
    std::vector<Cell> out;
    for (const auto& d : kVonNeumann) {
      const Cell q{p.x + d[0], p.y + d[1]};
      if (free(q)) out.push_back(q);
    }
    return out;
  }

  [[nodiscard]] int local_count(Cell p) const {
    const int rad = c_.crowding_radius;
    int n = 0;
    for (int dy = -rad; dy <= rad; ++dy) {
      for (int dx = -rad; dx <= rad; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const Cell q{p.x + dx, p.y + dy};
        if (on_lattice(c_, q) && get(q) >= 0) ++n;
      }
    }
    return n;
  }

 private:
  const LatticeConfig& c_;
  std::vector<int> cells_;
};

void enter(Agent& a, bool adjacent, int trap_steps) {
  if (adjacent && !a.adjacent) a.trap = trap_steps;
  a.adjacent = adjacent;
}

LatticeRun simulate(const LatticeConfig& config, LatticeState state, std::uint64_t seed,
                    const std::vector<int>& snapshot_steps) {
  Lattice lat(config);
  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    const auto& a = state.agents[i];
    if (!lat.free(a.pos)) throw ConfigError("lattice: agent on an occupied or blocked cell");
    lat.at(a.pos) = static_cast<int>(i);
  }
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto pick = [&gen](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen); };

  LatticeRun run;
  run.seed = seed;
  run.trapped_steps.assign(state.agents.size(), 0);
  auto record = [&] {
    run.N.push_back(state.agents.size());
    if (config.record_positions) {
      std::vector<Cell> pos;
      pos.reserve(state.agents.size());
      for (const auto& a : state.agents) pos.push_back(a.pos);
      run.positions.push_back(std::move(pos));
    }
    if (std::find(snapshot_steps.begin(), snapshot_steps.end(), state.step) != snapshot_steps.end()) {
      run.snapshots.push_back(state);
    }
  };
  record();
  std::vector<std::size_t> order;
  while (state.step < config.steps) {
    order.resize(state.agents.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen);
    for (std::size_t id : order) {
      Agent& a = state.agents[id];
      if (a.trap > 0) {
        --a.trap;
        ++run.trapped_steps[id];
        continue;
      }
      if (const auto moves = lat.free_neighbours(a.pos); !moves.empty()) {
        const Cell to = moves[pick(moves.size())];
        lat.at(a.pos) = kEmpty;
        lat.at(to) = static_cast<int>(id);
        a.pos = to;
        enter(a, lat.next_to_obstacle(to), config.trap_steps);
        if (a.trap > 0) continue;
      }
      const double n = static_cast<double>(state.agents.size());
      const double p = config.r * std::max(0.0, 1.0 - n / config.K) * std::exp(-config.crowding * lat.local_count(a.pos));
      if (p <= 0.0 || unif(gen) >= p) continue;
      const auto spots = lat.free_neighbours(a.pos);
      if (spots.empty()) continue;
      Agent child;
      child.pos = spots[pick(spots.size())];
      child.origin = child.pos;
      child.born = state.step + 1;
      enter(child, lat.next_to_obstacle(child.pos), config.trap_steps);
      lat.at(child.pos) = static_cast<int>(state.agents.size());
      state.agents.push_back(child);
      run.trapped_steps.push_back(0);
    }
    ++state.step;
    record();
  }
  run.final_state = std::move(state);
  return run;
}

}  // namespace

void LatticeConfig::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("lattice: width and height must be positive");
  if (!(r >= 0.0) || !(crowding >= 0.0) || crowding_radius < 0 || trap_steps < 0 || steps < 0) {
    throw ConfigError("lattice: r, crowding, radius, trap_steps and steps must be non-negative");
  }
  std::vector<char> used(static_cast<std::size_t>(width * height), 0);
  auto mark = [&](Cell p, const char* what) {
    if (!on_lattice(*this, p)) throw ConfigError(std::string("lattice: ") + what + " off the lattice");
    auto& u = used[static_cast<std::size_t>(p.y * width + p.x)];
    if (u) throw ConfigError(std::string("lattice: ") + what + " overlaps another obstacle or agent");
    u = 1;
  };
  for (const auto& o : obstacles) mark(o, "obstacle");
  for (const auto& a : agents) mark(a, "agent");
  if (!(K > 0.0) || K > static_cast<double>(free_cells())) {
    throw ConfigError("lattice: K must be positive and at most the free-cell count " + std::to_string(free_cells()));
  }
}

std::size_t LatticeConfig::free_cells() const {
  return static_cast<std::size_t>(width * height) - obstacles.size();
}

LatticeRun run_lattice(const LatticeConfig& config, std::uint64_t seed, const std::vector<int>& snapshot_steps) {
  config.validate();
  Lattice lat(config);
  LatticeState s;
  for (const auto& p : config.agents) {
    Agent a;
    a.pos = a.origin = p;
    enter(a, lat.next_to_obstacle(p), config.trap_steps);
    s.agents.push_back(a);
  }
  return simulate(config, std::move(s), seed, snapshot_steps);
}

LatticeRun continue_lattice(const LatticeConfig& config, const LatticeState& state, std::uint64_t seed) {
  if (state.step > config.steps) throw ConfigError("lattice: state is past the configured horizon");
  return simulate(config, state, seed, {});
}

std::vector<Cell> random_obstacles(int width, int height, std::size_t count, std::uint64_t seed,
                                   const std::vector<Cell>& keep) {
  std::vector<Cell> cand;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Cell c{x, y};
      if (std::find(keep.begin(), keep.end(), c) == keep.end()) cand.push_back(c);
    }
  }
  if (count > cand.size()) throw ConfigError("obstacles: more obstacles than available cells");
  std::mt19937_64 gen(seed);
  std::shuffle(cand.begin(), cand.end(), gen);
  cand.resize(count);
  std::sort(cand.begin(), cand.end(), [](Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
  return cand;
}

PairedGeometry paired_geometry(std::uint64_t seed, int free_side, int porous_side, std::size_t obstacles,
                               std::size_t agents) {
  if (porous_side < free_side) throw ConfigError("geometry: porous lattice must contain the free lattice");
  PairedGeometry g;
  g.porous.width = g.porous.height = porous_side;
  g.porous.obstacles = random_obstacles(porous_side, porous_side, obstacles, derive_seed(seed, 0));
  Lattice lat(g.porous);
  std::vector<Cell> cand;
  for (int y = 0; y < free_side; ++y) {
    for (int x = 0; x < free_side; ++x) {
      if (lat.get({x, y}) == kEmpty) cand.push_back({x, y});
    }
  }
  if (agents > cand.size()) throw ConfigError("geometry: not enough shared free cells for the agents");
  std::mt19937_64 gen(derive_seed(seed, 1));
  std::shuffle(cand.begin(), cand.end(), gen);
  cand.resize(agents);
  g.porous.agents = cand;
  g.open.width = g.open.height = free_side;
  g.open.agents = cand;
  g.open.K = g.porous.K = static_cast<double>(std::min(g.open.free_cells(), g.porous.free_cells()));
  return g;
}

std::optional<int> time_to_fraction(const LatticeRun& run, double K, double fraction) {
  for (std::size_t t = 0; t < run.N.size(); ++t) {
    if (static_cast<double>(run.N[t]) >= fraction * K) return static_cast<int>(t);
  }
  return std::nullopt;
}

MsdCurve msd(const std::vector<LatticeRun>& runs, int fit_lo, int fit_hi) {
  if (fit_lo < 1 || fit_hi <= fit_lo) throw DomainError("msd: need 1 <= fit_lo < fit_hi");
  MsdCurve c;
  std::vector<double> sum;
  std::vector<std::size_t> cnt;
  for (const auto& run : runs) {
    if (run.positions.size() < 2) throw DomainError("msd: run has fewer than two recorded steps");
    const std::size_t steps = run.positions.size();
    if (sum.size() < steps) {
      sum.resize(steps, 0.0);
      cnt.resize(steps, 0);
    }
    // agent ids are stable and birth steps are recoverable from when an id first appears
    for (std::size_t id = 0; id < run.positions.back().size(); ++id) {
      std::size_t born = 0;
      while (run.positions[born].size() <= id) ++born;
      const Cell o = run.positions[born][id];
      for (std::size_t t = born; t < steps; ++t) {
        const double dx = run.positions[t][id].x - o.x;
        const double dy = run.positions[t][id].y - o.y;
        sum[t - born] += dx * dx + dy * dy;
        ++cnt[t - born];
      }
    }
  }
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < sum.size(); ++k) {
    if (cnt[k] == 0) break;
    c.lag.push_back(static_cast<int>(k));
    c.msd.push_back(sum[k] / static_cast<double>(cnt[k]));
    c.agents.push_back(cnt[k]);
    if (static_cast<int>(k) >= fit_lo && static_cast<int>(k) <= fit_hi && c.msd.back() > 0.0) {
      lx.push_back(std::log(static_cast<double>(k)));
      ly.push_back(std::log(c.msd.back()));
    }
  }
  if (lx.size() < 2) {
    c.note = "no movement in the fit window; exponent undefined";
    return c;
  }
  const double mx = util::mean(lx), my = util::mean(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  c.exponent = sxy / sxx;
  return c;
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 1.0 : -1.0) * term;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size()), m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.D = d;
  const double ne = std::sqrt(n * m / (n + m));
  r.p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
  return r;
}

std::vector<double> RestartEnsemble::at(int horizon) const {
  std::vector<double> v;
  v.reserve(N.size());
  for (const auto& rep : N) v.push_back(static_cast<double>(rep.at(static_cast<std::size_t>(horizon))));
  return v;
}

double RestartEnsemble::mean(int horizon) const { return util::mean(at(horizon)); }

std::pair<double, double> RestartEnsemble::band(int horizon) const {
  auto v = at(horizon);
  return {util::quantile(v, 0.025), util::quantile(v, 0.975)};
}

RestartEnsemble restart_experiment(const LatticeConfig& config, const LatticeState& state, std::size_t replicates,
                                   RestartMode mode, std::uint64_t seed) {
  if (replicates < 2) throw ConfigError("restart: need at least two replicates");
  if (state.step > config.steps) throw ConfigError("restart: restart step beyond the run");
  auto cfg = config;
  cfg.record_positions = false;
  Lattice lat(cfg);
  std::vector<Cell> free_cells;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      if (lat.get({x, y}) == kEmpty) free_cells.push_back({x, y});
    }
  }
  if (state.agents.size() > free_cells.size()) throw ConfigError("restart: N exceeds the free cells");
  RestartEnsemble ens;
  ens.mode = mode;
  ens.restart_step = state.step;
  for (std::size_t i = 0; i < replicates; ++i) {
    const auto s = derive_seed(seed, i);
    LatticeState start = state;
    if (mode == RestartMode::kMacroMatched) {
      std::mt19937_64 gen(derive_seed(s, 0x6d61));
      auto cells = free_cells;
      std::shuffle(cells.begin(), cells.end(), gen);
      for (std::size_t k = 0; k < start.agents.size(); ++k) {
        auto& a = start.agents[k];
        a.pos = cells[k];
        a.origin = a.pos;
        a.trap = 0;
        a.adjacent = lat.next_to_obstacle(a.pos);
      }
    }
    ens.N.push_back(continue_lattice(cfg, start, s).N);
  }
  return ens;
}

RestartComparison compare_restarts(const RestartEnsemble& a, const RestartEnsemble& b,
                                   const std::vector<int>& horizons) {
  RestartComparison c;
  for (int h : horizons) {
    c.horizons.push_back(h);
    c.ks.push_back(ks_two_sample(a.at(h), b.at(h)));
  }
  return c;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void write_population_csv(const std::vector<const LatticeRun*>& runs, const std::vector<std::string>& labels,
                          const std::string& path) {
  if (runs.size() != labels.size()) throw DomainError("population csv: one label per run");
  std::vector<std::string> cols{"step"};
  cols.insert(cols.end(), labels.begin(), labels.end());
  util::CsvWriter csv(path, cols);
  std::size_t steps = 0;
  for (const auto* r : runs) steps = std::max(steps, r->N.size());
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (const auto* r : runs) row.push_back(t < r->N.size() ? std::to_string(r->N[t]) : "");
    csv.row(row);
  }
}

void write_positions_csv(const LatticeRun& run, const std::string& path) {
  util::CsvWriter csv(path, {"step", "agent", "x", "y"}, {"seed=" + std::to_string(run.seed)});
  for (std::size_t t = 0; t < run.positions.size(); ++t) {
    for (std::size_t id = 0; id < run.positions[t].size(); ++id) {
      csv.row(std::vector<std::string>{std::to_string(t), std::to_string(id), std::to_string(run.positions[t][id].x),
                                       std::to_string(run.positions[t][id].y)});
    }
  }
}

}  // namespace fracland::abm
