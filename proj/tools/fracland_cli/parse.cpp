#include <algorithm>
#include <cmath>
#include <set>

#include "fracland/abm/lattice.hpp"
#include "fracland/errors.hpp"
#include "fracland/stochastic/spectral.hpp"
#include "fracland_cli/experiments.hpp"

namespace fracland::cli {

namespace {

using nlohmann::json;

ExperimentInfo info(std::string kind, std::string summary, std::vector<FieldInfo> fields) {
  std::vector<FieldInfo> all{{"kind", false, "experiment kind; the subcommand supplies it when omitted"},
                             {"seed", false, "base seed (default 1, --seed overrides)"},
                             {"out", false, "output directory (default 'out', --out overrides)"},
                             {"threads", false, "worker threads (default 1, --threads overrides)"}};
  all.insert(all.end(), fields.begin(), fields.end());
  return {std::move(kind), std::move(summary), std::move(all)};
}

const std::vector<FieldInfo> kModelFields{
    {"model.type", false, "cubic, herbivory or quorum"},
    {"model.a0 .. model.a3", false, "cubic coefficients (default 0, 1, 0, -1)"},
    {"model.r, model.K, model.A, model.B", false, "herbivory parameters (default 0.8, 3, 0.2, 0.6)"},
    {"model.V, model.K, model.x0, model.rho", false, "quorum parameters (default 3, 1, 0.05, 0.4)"}};

const std::vector<FieldInfo> kSolverFields{
    {"solver.corrector", false, "newton or fixed_point"},
    {"solver.corrector_iters", false, "fixed-point sweeps (default 3)"},
    {"solver.history", false, "direct or fft"},
    {"solver.window", false, "short-memory window in steps, direct history only"},
    {"solver.lower_bound, solver.upper_bound", false, "admissible state box"}};

std::vector<FieldInfo> with(std::vector<FieldInfo> a, const std::vector<FieldInfo>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

models::RationalModel parse_model(Fields f, const std::string& fallback_type) {
  const auto type = f.text("type", fallback_type, {"cubic", "herbivory", "quorum"});
  std::optional<models::RationalModel> m;
  std::string error;
  if (type == "cubic") {
    const double a0 = f.number("a0", 0.0), a1 = f.number("a1", 1.0), a2 = f.number("a2", 0.0), a3 = f.number("a3", -1.0);
    m = models::RationalModel::cubic(a0, a1, a2, a3);
  } else if (type == "herbivory") {
    models::HerbivoryParams p;
    p.r = f.positive("r", p.r);
    p.K = f.positive("K", p.K);
    p.A = f.positive("A", p.A);
    p.B = f.non_negative("B", p.B);
    m = models::RationalModel::herbivory(p);
  } else {
    models::QuorumParams p;
    p.V = f.non_negative("V", p.V);
    p.K = f.positive("K", p.K);
    p.x0 = f.non_negative("x0", p.x0);
    p.rho = f.number("rho", p.rho);
    if (!(p.rho > 0.0 && p.rho < 2.0)) f.fail("rho", "must lie in (0, 2)");
    m = models::RationalModel::quorum(p);
  }
  f.finish();
  return *m;
}

fde::SolverOptions parse_solver(Fields f, fde::HistoryMethod fallback) {
  fde::SolverOptions o;
  o.corrector = f.text("corrector", "newton", {"newton", "fixed_point"}) == "newton" ? fde::CorrectorMethod::kNewton
                                                                                      : fde::CorrectorMethod::kFixedPoint;
  o.corrector_iters = static_cast<int>(f.integer("corrector_iters", 3, 1));
  o.history = f.text("history", fallback == fde::HistoryMethod::kFft ? "fft" : "direct", {"direct", "fft"}) == "fft"
                  ? fde::HistoryMethod::kFft
                  : fde::HistoryMethod::kDirect;
  o.window = static_cast<std::size_t>(f.integer("window", 0, 0));
  if (o.window > 0 && o.history == fde::HistoryMethod::kFft) f.fail("window", "a window needs history 'direct'");
  if (f.has("lower_bound")) o.lower_bound = f.number("lower_bound");
  if (f.has("upper_bound")) o.upper_bound = f.number("upper_bound");
  if (!(o.lower_bound < o.upper_bound)) f.fail("upper_bound", "must exceed lower_bound");
  f.finish();
  return o;
}

stochastic::NoiseSpec parse_noise(Fields f, std::optional<std::uint64_t> default_seed) {
  stochastic::NoiseSpec n;
  n.kind = f.text("kind", "additive", {"additive", "multiplicative"}) == "additive"
               ? stochastic::NoiseKind::kAdditive
               : stochastic::NoiseKind::kMultiplicative;
  n.sigma = f.positive("sigma");
  if (n.kind == stochastic::NoiseKind::kMultiplicative) n.beta = f.positive("beta", 1.0);
  if (default_seed) n.seed = f.seed("seed", *default_seed);
  f.finish();
  return n;
}

std::vector<double> parse_alphas(Fields& f, std::vector<double> fallback) {
  auto a = f.alphas("alphas", "memory", std::move(fallback));
  if (std::set<double>(a.begin(), a.end()).size() != a.size()) {
    f.fail(f.has("memory") ? "memory" : "alphas", "entries must be distinct");
  }
  return a;
}

std::vector<std::size_t> sizes(Fields& f, const std::string& key, std::vector<std::size_t> fallback) {
  std::vector<std::int64_t> fb(fallback.begin(), fallback.end());
  std::vector<std::size_t> out;
  for (auto v : f.integers(key, fb, 1)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

void check_grid(Fields& f, double t0, double t_end, double h) {
  try {
    (void)fde::SolverGrid(t0, t_end, h);
  } catch (const Error& e) {
    f.fail("t_end", e.what());
  }
}

/// Every parameter value the schedule takes on the grid must give a valid model.
void check_schedule_values(Fields& f, const models::ParameterSchedule& s, const models::RationalModel& model,
                           const fde::SolverGrid& grid) {
  auto values = s.sample(grid);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  for (double v : values) {
    try {
      (void)model.with_parameter(s.parameter(), v);
    } catch (const Error& e) {
      f.fail("parameter", "value " + std::to_string(v) + " is invalid: " + e.what());
    }
  }
}

models::ParameterSchedule parse_schedule(Fields f, const models::RationalModel& model, const fde::SolverGrid& grid) {
  const auto type = f.text("type", std::nullopt, {"constant", "pulse", "step", "ramp", "segments"});
  const auto name = f.text("parameter");
  if (!model.has_parameter(name)) f.fail("parameter", "the model has no parameter '" + name + "'");
  const double base = f.number("baseline", model.parameter(name));
  const double t0 = grid.t0(), t1 = grid.t_end();
  std::optional<models::ParameterSchedule> s;
  std::string error;
  if (type == "constant") {
    s = models::ParameterSchedule::constant(name, base, t0, t1);
  } else if (type == "pulse") {
    const double offset = f.number("offset"), on = f.number("t_on"), off = f.number("t_off");
    try {
      s = models::ParameterSchedule::pulse(name, base, offset, on, off, t0, t1);
    } catch (const Error& e) {
      error = e.what();
    }
  } else if (type == "step") {
    const double after = f.number("after"), at = f.number("t_step");
    try {
      s = models::ParameterSchedule::step(name, base, after, at, t0, t1);
    } catch (const Error& e) {
      error = e.what();
    }
  } else if (type == "ramp") {
    const double to = f.number("to"), ramp_time = f.positive("ramp_time");
    const bool back = f.flag("back", true);
    try {
      s = models::ParameterSchedule::ramp(name, base, to, ramp_time, back, t0, t1);
    } catch (const Error& e) {
      error = e.what();
    }
  } else {
    std::vector<models::ScheduleSegment> segs;
    for (auto g : f.tables("segments")) {
      models::ScheduleSegment seg;
      seg.t_start = g.number("t_start");
      seg.t_end = g.number("t_end");
      const auto shape = g.text("shape", "constant", {"constant", "offset", "smoothstep"});
      seg.shape = shape == "constant" ? models::SegmentShape::kConstant
                  : shape == "offset" ? models::SegmentShape::kOffset
                                      : models::SegmentShape::kSmoothstep;
      seg.v0 = g.number("v0");
      seg.v1 = seg.shape == models::SegmentShape::kSmoothstep ? g.number("v1") : 0.0;
      g.finish();
      segs.push_back(seg);
    }
    if (segs.empty()) f.fail("segments", "at least one segment is required");
    try {
      s = models::ParameterSchedule(name, base, std::move(segs));
    } catch (const Error& e) {
      error = e.what();
    }
    if (s && (s->t_begin() > t0 || s->t_end() < t1)) f.fail("segments", "segments must cover the whole run");
  }
  if (!s) f.fail("type", error);
  check_schedule_values(f, *s, model, grid);
  f.finish();
  return *s;
}

SimulateSpec parse_simulate(Fields& top, const Experiment& e) {
  SimulateSpec s;
  s.model = parse_model(top.table("model"), "cubic");
  s.alphas = parse_alphas(top, {1.0});
  s.x0 = top.number("x0");
  {
    auto g = top.table("grid");
    s.t0 = g.number("t0", 0.0);
    s.t_end = g.number("t_end");
    s.h = g.positive("h", 0.01);
    check_grid(g, s.t0, s.t_end, s.h);
    g.finish();
  }
  const fde::SolverGrid grid(s.t0, s.t_end, s.h);
  if (top.has("schedule")) s.schedule = parse_schedule(top.table("schedule"), s.model, grid);
  if (top.has("noise")) s.noise = parse_noise(top.table("noise"), e.seed);
  s.solver = parse_solver(top.table("solver"), fde::HistoryMethod::kFft);
  s.sample_every = static_cast<std::size_t>(top.integer("sample_every", 1, 1));
  return s;
}

void require_bistable(Fields& top, const models::RationalModel& m) {
  if (!models::equilibria(m).bistable()) top.fail("model", "the model is not bistable");
}

LandscapeSpec parse_landscape(Fields& top) {
  LandscapeSpec s;
  s.model = parse_model(top.table("model"), "cubic");
  require_bistable(top, s.model);
  s.alphas = parse_alphas(top, s.alphas);
  s.h = top.positive("h", s.h);
  s.t_end = top.positive("t_end", s.t_end);
  s.epsilon_fraction = top.positive("epsilon_fraction", s.epsilon_fraction);
  if (s.epsilon_fraction >= 0.5) top.fail("epsilon_fraction", "must be below 0.5");
  s.solver = parse_solver(top.table("solver"), fde::HistoryMethod::kFft);
  return s;
}

EnsembleSpec parse_ensemble(Fields& top) {
  EnsembleSpec s;
  s.n = static_cast<std::size_t>(top.integer("n", 200, 1));
  {
    auto b = top.table("bounds");
    s.bounds.a1_lo = b.number("a1_lo", s.bounds.a1_lo);
    s.bounds.a1_hi = b.number("a1_hi", s.bounds.a1_hi);
    s.bounds.a3_lo = b.number("a3_lo", s.bounds.a3_lo);
    s.bounds.a3_hi = b.number("a3_hi", s.bounds.a3_hi);
    if (!(s.bounds.a1_lo < s.bounds.a1_hi && s.bounds.a1_hi < 0.0)) b.fail("a1_hi", "need a1_lo < a1_hi < 0");
    if (!(s.bounds.a3_lo < s.bounds.a3_hi && s.bounds.a3_hi < 0.0)) b.fail("a3_hi", "need a3_lo < a3_hi < 0");
    b.finish();
  }
  auto& o = s.options;
  o.alphas = parse_alphas(top, {1.0, 0.8});
  if (o.alphas.size() < 2) top.fail("alphas", "need a reference order and at least one more");
  {
    auto p = top.table("pulse");
    o.t_on = p.non_negative("t_on", o.t_on);
    o.duration = p.positive("duration", o.duration);
    o.resilience_fraction = p.positive("resilience_fraction", o.resilience_fraction);
    o.tolerance = p.positive("tolerance", o.tolerance);
    o.unbounded_factor = p.positive("unbounded_factor", o.unbounded_factor);
    p.finish();
  }
  o.h = top.positive("h", o.h);
  o.landscape_t_end = top.number("landscape_t_end", o.landscape_t_end);
  o.solver = parse_solver(top.table("solver"), fde::HistoryMethod::kFft);
  return s;
}

PulseSpec parse_pulse(Fields& top) {
  PulseSpec s;
  s.model = parse_model(top.table("model"), "herbivory");
  require_bistable(top, s.model);
  s.alphas = parse_alphas(top, s.alphas);
  const std::string fallback_parameter = s.model.kind() == models::ModelKind::kHerbivory ? "B"
                                         : s.model.kind() == models::ModelKind::kQuorum  ? "rho"
                                                                                         : "a0";
  s.h = top.positive("h", s.h);
  {
    auto r = top.table("resilience");
    s.parameter = r.text("parameter", fallback_parameter);
    if (!s.model.has_parameter(s.parameter)) r.fail("parameter", "the model has no parameter '" + s.parameter + "'");
    s.magnitude = r.number("magnitude", s.magnitude);
    s.t_on = r.non_negative("t_on", s.t_on);
    s.t_off = r.number("t_off", s.t_off);
    if (!(s.t_off > s.t_on)) r.fail("t_off", "must exceed t_on");
    s.t_end = r.number("t_end", s.t_end);
    if (!(s.t_end > s.t_off)) r.fail("t_end", "must exceed t_off");
    const fde::SolverGrid grid(0.0, s.t_end, s.h);
    check_schedule_values(r, models::ParameterSchedule::pulse(s.parameter, s.model.parameter(s.parameter),
                                                              s.magnitude, s.t_on, s.t_off, 0.0, s.t_end),
                          s.model, grid);
    r.finish();
  }
  s.sample_every = static_cast<std::size_t>(top.integer("sample_every", 100, 1));
  {
    auto r = top.table("resistance");
    s.resistance = r.flag("enabled", true);
    if (s.resistance) {
      s.pulse.parameter = r.text("parameter", s.parameter);
      if (!s.model.has_parameter(s.pulse.parameter)) {
        r.fail("parameter", "the model has no parameter '" + s.pulse.parameter + "'");
      }
      s.pulse.t_on = r.non_negative("t_on", 10.0);
      s.pulse.duration = r.positive("duration", 10.0);
      s.pulse.direction = r.number("direction", 1.0);
      if (s.pulse.direction != 1.0 && s.pulse.direction != -1.0) r.fail("direction", "must be 1 or -1");
      s.pulse.horizon = r.number("horizon", 0.0);
      s.pulse.h = s.h;
      s.lo = r.non_negative("lo", s.lo);
      s.hi = r.positive("hi", s.hi);
      if (!(s.hi > s.lo)) r.fail("hi", "must exceed lo");
      s.tolerance = r.positive("tolerance", s.tolerance);
    }
    r.finish();
  }
  s.solver = parse_solver(top.table("solver"), fde::HistoryMethod::kFft);
  return s;
}

StochasticSpec parse_stochastic(Fields& top) {
  StochasticSpec s;
  s.model = parse_model(top.table("model"), "cubic");
  require_bistable(top, s.model);
  s.alphas = parse_alphas(top, s.alphas);
  s.noise = parse_noise(top.table("noise"), std::nullopt);
  s.x0 = top.number("x0", s.x0);
  s.t_end = top.positive("t_end", s.t_end);
  s.h = top.positive("h", s.h);
  s.burn_in = top.non_negative("burn_in", s.burn_in);
  if (!(s.burn_in < s.t_end)) top.fail("burn_in", "must be shorter than t_end");
  check_grid(top, 0.0, s.t_end, s.h);
  s.replicates = static_cast<std::size_t>(top.integer("replicates", 1, 1));
  const auto n = static_cast<std::size_t>(std::llround((s.t_end - s.burn_in) / s.h));
  s.block_sizes = sizes(top, "block_sizes", s.block_sizes);
  if (n < 10 * *std::max_element(s.block_sizes.begin(), s.block_sizes.end())) {
    top.fail("block_sizes", "the series after burn-in needs at least 10 blocks of the largest size");
  }
  s.tau_window = top.positive("tau_window", s.tau_window);
  s.tau_blocks = sizes(top, "tau_blocks", s.tau_blocks);
  for (auto m : s.tau_blocks) {
    if (static_cast<double>(n / m) <= s.tau_window / (static_cast<double>(m) * s.h) + 1.0) {
      top.fail("tau_blocks", "block size " + std::to_string(m) + " leaves fewer block means than the tau window");
    }
  }
  s.acf_max_lag = top.positive("acf_max_lag", s.acf_max_lag);
  if (s.acf_max_lag / s.h >= static_cast<double>(n)) top.fail("acf_max_lag", "exceeds the series length");
  {
    auto c = top.table("commit");
    s.commit.x_core = c.positive("x_core", s.commit.x_core);
    s.commit.tau_hold = c.non_negative("tau_hold", s.commit.tau_hold);
    if (std::llround(s.commit.tau_hold / s.h) < 1) c.fail("tau_hold", "shorter than one step");
    c.finish();
  }
  {
    auto p = top.table("psd");
    s.psd_segment = static_cast<std::size_t>(p.integer("segment", 0, 0));
    if (s.psd_segment > n) p.fail("segment", "longer than the series after burn-in");
    if (s.psd_segment == 0 && stochastic::default_segment(n) < 8) p.fail("segment", "series too short for a spectrum");
    s.psd_overlap = p.non_negative("overlap", s.psd_overlap);
    if (s.psd_overlap >= 1.0) p.fail("overlap", "must be below 1");
    p.finish();
  }
  {
    auto v = top.table("survival");
    s.survival_t_max = v.positive("t_max", s.survival_t_max);
    s.survival_step = v.positive("step", s.survival_step);
    v.finish();
  }
  s.trajectory_every = static_cast<std::size_t>(top.integer("trajectory_every", 0, 0));
  s.solver = parse_solver(top.table("solver"), fde::HistoryMethod::kFft);
  return s;
}

FitSpec parse_fit(Fields& top) {
  FitSpec s;
  {
    auto t = top.table("truth");
    s.truth.r = t.positive("r", s.truth.r);
    s.truth.K = t.positive("K", s.truth.K);
    s.truth.A = t.positive("A", s.truth.A);
    t.finish();
  }
  s.alpha = top.alpha("alpha", s.alpha);
  std::vector<double> b_default;
  for (int i = 2; i <= 12; ++i) b_default.push_back(i / 10.0);
  s.b_values = top.numbers("B", b_default);
  const auto window = fitting::herbivory_window(s.truth.r, s.truth.K, s.truth.A);
  for (double b : s.b_values) {
    if (!window.contains(b)) {
      top.fail("B", "B = " + std::to_string(b) + " lies outside the bistable window (" + std::to_string(window.lower) +
                        ", " + std::to_string(window.upper) + ")");
    }
  }
  {
    auto d = top.table("dataset");
    s.dataset.t_end = d.positive("t_end", s.dataset.t_end);
    s.dataset.samples = static_cast<std::size_t>(d.integer("samples", 200, 2));
    s.dataset.epsilon = d.positive("epsilon", s.dataset.epsilon);
    if (s.dataset.epsilon >= 1.0) d.fail("epsilon", "must be below 1");
    s.dataset.h = d.positive("h", s.dataset.h);
    s.dataset.solver = parse_solver(d.table("solver"), fde::HistoryMethod::kFft);
    d.finish();
  }
  {
    auto g = top.table("guess");
    s.guess.r = g.positive("r", s.guess.r);
    s.guess.K = g.positive("K", s.guess.K);
    s.guess.A = g.positive("A", s.guess.A);
    if (g.has("B")) {
      s.guess.B = g.numbers("B");
      if (s.guess.B.size() != s.b_values.size()) g.fail("B", "needs one entry per dataset B");
    }
    g.finish();
  }
  {
    auto o = top.table("options");
    s.options.penalty_weight = o.non_negative("penalty_weight", s.options.penalty_weight);
    s.options.lsq.max_iter = static_cast<int>(o.integer("max_iter", s.options.lsq.max_iter, 1));
    if (o.has("run_weights")) {
      s.options.run_weights = o.numbers("run_weights");
      if (s.options.run_weights.size() != s.b_values.size()) o.fail("run_weights", "needs one weight per run");
      for (double w : s.options.run_weights) {
        if (!(w > 0.0)) o.fail("run_weights", "weights must be positive");
      }
    }
    o.finish();
  }
  s.b_hi = top.positive("b_hi", s.b_hi);
  {
    auto p = top.table("two_pulse");
    s.two_pulse = p.flag("enabled", true);
    if (s.two_pulse) {
      auto& t = s.two_pulse_setup;
      t.base_B = p.positive("base_B", t.base_B);
      t.offset1 = p.number("offset1", t.offset1);
      t.offset2 = p.number("offset2", t.offset2);
      t.on1 = p.non_negative("on1", t.on1);
      t.off1 = p.number("off1", t.off1);
      t.on2 = p.number("on2", t.on2);
      t.off2 = p.number("off2", t.off2);
      t.t_end = p.positive("t_end", t.t_end);
      t.samples = static_cast<std::size_t>(p.integer("samples", static_cast<std::int64_t>(t.samples), 2));
      t.h = p.positive("h", t.h);
      if (!(t.on1 < t.off1 && t.off1 <= t.on2 && t.on2 < t.off2 && t.off2 < t.t_end)) {
        p.fail("off2", "need on1 < off1 <= on2 < off2 < t_end");
      }
      if (!window.contains(t.base_B)) p.fail("base_B", "must lie in the bistable window");
    }
    p.finish();
  }
  return s;
}

AbmSpec parse_abm(Fields& top, const Experiment& e) {
  AbmSpec s;
  s.geometry_seed = top.seed("geometry_seed", s.geometry_seed);
  s.free_side = static_cast<int>(top.integer("free_side", s.free_side, 2));
  s.porous_side = static_cast<int>(top.integer("porous_side", s.porous_side, 2));
  s.obstacles = static_cast<std::size_t>(top.integer("obstacles", static_cast<std::int64_t>(s.obstacles), 0));
  s.agents = static_cast<std::size_t>(top.integer("agents", static_cast<std::int64_t>(s.agents), 1));
  s.r = top.non_negative("r", s.r);
  if (s.r > 1.0) top.fail("r", "a birth probability must not exceed 1");
  if (top.has("K")) s.K = top.positive("K");
  s.crowding = top.non_negative("crowding", s.crowding);
  s.radius = static_cast<int>(top.integer("radius", s.radius, 0));
  s.trap_steps = static_cast<int>(top.integer("trap_steps", s.trap_steps, 0));
  s.steps = static_cast<int>(top.integer("steps", s.steps, 1));
  s.fraction = top.positive("fraction", s.fraction);
  if (s.fraction > 1.0) top.fail("fraction", "must not exceed 1");
  std::vector<std::int64_t> seeds_default;
  for (std::uint64_t i = 0; i < 10; ++i) seeds_default.push_back(static_cast<std::int64_t>(e.seed + i));
  for (auto v : top.integers("t90_seeds", seeds_default, 0)) s.t90_seeds.push_back(static_cast<std::uint64_t>(v));
  {
    auto r = top.table("restart");
    s.restart = r.flag("enabled", true);
    if (s.restart) {
      s.restart_step = static_cast<int>(r.integer("step", s.restart_step, 0));
      if (s.restart_step >= s.steps) r.fail("step", "must come before the last step");
      s.replicates = static_cast<std::size_t>(r.integer("replicates", static_cast<std::int64_t>(s.replicates), 2));
      std::vector<std::int64_t> h_default{10, 25, 50, s.steps - s.restart_step};
      h_default.erase(std::remove_if(h_default.begin(), h_default.end(),
                                     [&](std::int64_t h) { return h > s.steps - s.restart_step; }),
                      h_default.end());
      s.horizons.clear();
      for (auto h : r.integers("horizons", h_default, 0)) {
        if (h > s.steps - s.restart_step) r.fail("horizons", "horizons must not run past the last step");
        s.horizons.push_back(static_cast<int>(h));
      }
      s.baseline_seed = r.seed("baseline_seed", abm::derive_seed(e.seed, 1));
      s.snapshot_seed = r.seed("snapshot_seed", abm::derive_seed(e.seed, 2));
      s.macro_seed = r.seed("macro_seed", abm::derive_seed(e.seed, 3));
    } else {
      s.baseline_seed = r.seed("baseline_seed", abm::derive_seed(e.seed, 1));
    }
    r.finish();
  }
  {
    auto m = top.table("msd");
    s.msd = m.flag("enabled", true);
    if (s.msd) {
      s.fit_lo = static_cast<int>(m.integer("fit_lo", s.fit_lo, 1));
      s.fit_hi = static_cast<int>(m.integer("fit_hi", s.fit_hi, 2));
      if (s.fit_hi <= s.fit_lo || s.fit_hi > s.steps) m.fail("fit_hi", "need fit_lo < fit_hi <= steps");
    }
    m.finish();
  }
  s.write_positions = top.flag("write_positions", false);
  try {
    auto g = abm::paired_geometry(s.geometry_seed, s.free_side, s.porous_side, s.obstacles, s.agents);
    for (auto* c : {&g.open, &g.porous}) {
      if (s.K) c->K = *s.K;
      c->r = s.r;
      c->crowding = s.crowding;
      c->crowding_radius = s.radius;
      c->trap_steps = s.trap_steps;
      c->steps = s.steps;
      c->validate();
    }
  } catch (const Error& err) {
    top.fail(s.K ? "K" : "obstacles", err.what());
  }
  return s;
}

HysteresisSpec parse_hysteresis(Fields& top) {
  HysteresisSpec s;
  {
    auto q = top.table("quorum");
    s.quorum.V = q.non_negative("V", s.quorum.V);
    s.quorum.K = q.positive("K", s.quorum.K);
    s.quorum.x0 = q.non_negative("x0", s.quorum.x0);
    q.finish();
  }
  s.alphas = parse_alphas(top, s.alphas);
  s.rho_high = top.number("rho_high", s.rho_high);
  s.rho_low = top.number("rho_low", s.rho_low);
  if (!(s.rho_high > 0.0 && s.rho_high < 2.0)) top.fail("rho_high", "must lie in (0, 2)");
  if (!(s.rho_low > 0.0 && s.rho_low < s.rho_high)) top.fail("rho_low", "must lie in (0, rho_high)");
  s.t_turn = top.positive("t_turn", s.t_turn);
  s.t_end = top.positive("t_end", s.t_end);
  if (!(s.t_end > s.t_turn)) top.fail("t_end", "must exceed t_turn");
  s.h = top.positive("h", s.h);
  check_grid(top, 0.0, s.t_end, s.h);
  s.x_init = top.number("x_init", s.x_init);
  s.rhs_std = top.non_negative("rhs_std", s.rhs_std);
  s.hold = top.positive("hold", s.hold);
  s.bin_width = top.positive("bin_width", s.bin_width);
  s.sample_interval = top.positive("sample_interval", s.sample_interval);
  const double ratio = s.sample_interval / s.h;
  if (ratio < 1.0 || std::fabs(ratio - std::round(ratio)) > 1e-9) {
    top.fail("sample_interval", "must be a whole multiple of h");
  }
  s.replicates = static_cast<std::size_t>(top.integer("replicates", static_cast<std::int64_t>(s.replicates), 1));
  s.solver = parse_solver(top.table("solver"), fde::HistoryMethod::kFft);
  s.quorum.rho = s.rho_high;
  return s;
}

}  // namespace

std::vector<ExperimentInfo> list_experiments() {
  const FieldInfo alphas{"alphas | memory", false, "orders in (0, 1] or memory strengths 1 - alpha"};
  return {
      info("simulate", "deterministic or noisy trajectories for a list of orders",
           with({{"model", false, "model table"},
                 alphas,
                 {"x0", true, "initial state"},
                 {"grid.t0", false, "start time (default 0)"},
                 {"grid.t_end", true, "end time"},
                 {"grid.h", false, "step (default 0.01)"},
                 {"schedule.type", false, "constant, pulse, step, ramp or segments"},
                 {"schedule.parameter", false, "scheduled model parameter"},
                 {"schedule.baseline, offset, t_on, t_off, after, t_step, to, ramp_time, back, segments", false,
                  "shape values for the chosen type"},
                 {"noise.kind, noise.sigma, noise.beta, noise.seed", false, "white forcing; shared across orders"},
                 {"sample_every", false, "write every n-th node (default 1)"}},
                kModelFields)),
      info("stochastic", "noise transmission: block variance, tau_int, ACF, PSD and committed switching",
           with({{"model", false, "model table (default double well)"},
                 alphas,
                 {"noise.sigma", true, "noise amplitude"},
                 {"noise.kind, noise.beta", false, "additive or multiplicative"},
                 {"x0, t_end, h, burn_in", false, "run settings (default 1, 1000, 0.01, 100)"},
                 {"replicates", false, "noise seeds seed, seed + 1, ... (default 1)"},
                 {"block_sizes, tau_blocks, tau_window, acf_max_lag", false, "variance and correlation settings"},
                 {"commit.x_core, commit.tau_hold", false, "committed switching rule"},
                 {"psd.segment, psd.overlap", false, "Welch settings"},
                 {"survival.t_max, survival.step", false, "pooled survival grid"},
                 {"trajectory_every", false, "write every n-th node; 0 disables"}},
                with(kModelFields, kSolverFields))),
      info("landscape", "potential reconstruction and basin metrics per order",
           with({{"model", false, "bistable model table"},
                 alphas,
                 {"h, t_end, epsilon_fraction", false, "trajectory settings"}},
                with(kModelFields, kSolverFields))),
      info("pulse", "resilience and resistance of one model under a parameter pulse (kind alias pulse-metrics)",
           with({{"model", false, "bistable model table (default herbivory)"},
                 alphas,
                 {"h", false, "step (default 0.01)"},
                 {"resilience.parameter, magnitude, t_on, t_off, t_end", false, "recovery pulse"},
                 {"resistance.enabled, parameter, t_on, duration, direction, horizon, lo, hi, tolerance", false,
                  "tipping search"},
                 {"sample_every", false, "trajectory output stride (default 100)"}},
                with(kModelFields, kSolverFields))),
      info("ensemble", "random bistable cubics: basin, resilience and resistance per order",
           with({{"n", false, "number of models (default 200)"},
                 alphas,
                 {"bounds.a1_lo, a1_hi, a3_lo, a3_hi", false, "coefficient intervals"},
                 {"pulse.t_on, duration, resilience_fraction, tolerance, unbounded_factor", false, "pulse settings"},
                 {"h, landscape_t_end", false, "step and landscape run length"}},
                kSolverFields)),
      info("fit", "memory-free fit to memory-driven herbivory data and the resulting fold shift",
           {{"truth.r, truth.K, truth.A", false, "generating parameters (default 0.8, 6, 0.2)"},
            {"alpha", false, "order of the data (default 0.8)"},
            {"B", false, "herbivore pressures (default 0.2 .. 1.2)"},
            {"dataset.t_end, samples, epsilon, h, solver", false, "data generation"},
            {"guess.r, guess.K, guess.A, guess.B", false, "starting point"},
            {"options.penalty_weight, max_iter, run_weights", false, "fit settings"},
            {"b_hi", false, "upper end of the fold sweep"},
            {"two_pulse.enabled, base_B, offset1, offset2, on1, off1, on2, off2, t_end, samples, h", false,
             "pulse inference check"}}),
      info("abm", "lattice growth with and without obstacles: t90, restarts and MSD",
           {{"geometry_seed", false, "obstacle layout (default 123)"},
            {"free_side, porous_side, obstacles, agents", false, "geometry"},
            {"r, K, crowding, radius, trap_steps, steps, fraction", false, "dynamics"},
            {"t90_seeds", false, "seed pairs for time to fraction of K"},
            {"restart.enabled, step, replicates, horizons", false, "restart experiment"},
            {"restart.baseline_seed, snapshot_seed, macro_seed", false, "restart seeds"},
            {"msd.enabled, fit_lo, fit_hi", false, "anomalous diffusion fit window"},
            {"write_positions", false, "per-step agent positions of the baseline runs"}}),
      info("hysteresis", "noisy quorum loop under a smooth rho ramp down and back",
           with({{"quorum.V, quorum.K, quorum.x0", false, "model (default 3, 1, 0.05)"},
                 alphas,
                 {"rho_high, rho_low, t_turn, t_end, h", false, "ramp (default 0.38, 0.29, 250, 1000, 0.01)"},
                 {"x_init", false, "initial state (default 1.5)"},
                 {"rhs_std", false, "std of the white forcing per step (default 1.2)"},
                 {"hold, bin_width, sample_interval", false, "loop summary settings"},
                 {"replicates", false, "noise seeds seed, seed + 1, ... (default 10)"}},
                kSolverFields)),
  };
}

Experiment parse_experiment(const ConfigDocument& doc, const Overrides& overrides,
                            const std::optional<std::string>& expected_kind) {
  Experiment e;
  e.source = doc.source;
  e.resolved = json::object();
  Fields top(doc, "", &e.resolved);

  auto allowed = kExperimentKinds;
  allowed.push_back("pulse-metrics");
  if (!top.has("kind") && !expected_kind) top.fail("kind", "required string is missing");
  e.kind = top.text("kind", expected_kind, allowed);
  if (e.kind == "pulse-metrics") e.kind = "pulse";
  e.resolved["kind"] = e.kind;
  if (expected_kind && *expected_kind != e.kind) {
    top.fail("kind", "config is for '" + e.kind + "' but the command is '" + *expected_kind + "'");
  }

  e.seed = top.seed("seed", 1);
  if (overrides.seed) e.seed = *overrides.seed;
  e.resolved["seed"] = e.seed;
  e.out = top.text("out", "out");
  if (overrides.out) e.out = *overrides.out;
  e.resolved["out"] = e.out;
  e.threads = static_cast<unsigned>(top.integer("threads", 1, 1));
  if (overrides.threads) {
    if (*overrides.threads < 1) throw ConfigError("--threads must be at least 1");
    e.threads = *overrides.threads;
  }
  e.resolved["threads"] = e.threads;

  if (e.kind == "simulate") {
    e.spec = parse_simulate(top, e);
  } else if (e.kind == "stochastic") {
    e.spec = parse_stochastic(top);
  } else if (e.kind == "landscape") {
    e.spec = parse_landscape(top);
  } else if (e.kind == "pulse") {
    e.spec = parse_pulse(top);
  } else if (e.kind == "ensemble") {
    e.spec = parse_ensemble(top);
  } else if (e.kind == "fit") {
    e.spec = parse_fit(top);
  } else if (e.kind == "abm") {
    e.spec = parse_abm(top, e);
  } else {
    e.spec = parse_hysteresis(top);
  }
  top.finish();
  return e;
}

}  // namespace fracland::cli
