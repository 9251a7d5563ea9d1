#include "fracland/perturbation/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "fracland/util/csv.hpp"

namespace fracland::perturbation {

namespace {

std::optional<double> relative(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b || *a < 0.0 || *b < 0.0 || *a + *b == 0.0) return std::nullopt;
  return relative_effect(*a, *b);
}

double landscape_time(const models::RationalModel& m, const models::EquilibriumSet& eq, const EnsembleOptions& o) {
  if (o.landscape_t_end > 0.0) return o.landscape_t_end;
  const double rate = std::min(std::abs(m.drift_derivative(eq.lower_stable())),
                               std::abs(m.drift_derivative(eq.upper_stable())));
  return std::clamp(40.0 / rate, 100.0, 2000.0);
}

/// Doubles the magnitude until a pulse tips the reference model.
std::optional<double> upper_bracket(const models::RationalModel& m, fde::MemoryOrder order, const PulseTemplate& pt,
                                    const fde::SolverOptions& solver) {
  double hi = std::max(std::abs(m.parameter(pt.parameter)), 1e-2);
  for (int k = 0; k < 12; ++k, hi *= 2.0) {
    const auto o = classify_pulse(m, order, pt, hi, solver);
    if (o == ProbeOutcome::kTransitioned) return hi;
    if (o == ProbeOutcome::kUnresolved) return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> EnsembleRecord::relative_resilience(std::size_t i) const {
  const auto& a = entries.at(i);
  const auto& b = entries.at(0);
  if (a.resilience_stalled && b.resilience_stalled) return std::nullopt;
  if (a.resilience_stalled) return b.resilience ? std::optional<double>(-1.0) : std::nullopt;
  if (b.resilience_stalled) return a.resilience ? std::optional<double>(1.0) : std::nullopt;
  return relative(a.resilience, b.resilience);
}

std::optional<double> EnsembleRecord::relative_resistance(std::size_t i) const {
  const auto& a = entries.at(i);
  const auto& b = entries.at(0);
  if (a.resistance_unbounded && b.resistance_unbounded) return std::nullopt;
  if (a.resistance_unbounded) return b.resistance ? std::optional<double>(1.0) : std::nullopt;
  if (b.resistance_unbounded) return a.resistance ? std::optional<double>(-1.0) : std::nullopt;
  return relative(a.resistance, b.resistance);
}

EnsembleRecord evaluate_model(const models::RationalModel& model, std::size_t id, const EnsembleOptions& options) {
  if (options.alphas.empty()) throw ConfigError("ensemble: empty alpha list");
  EnsembleRecord rec{id, model, {}};
  const auto eq = models::equilibria(model);
  if (!eq.bistable()) throw DomainError("ensemble: model " + std::to_string(id) + " is not bistable");

  PulseTemplate pt;
  pt.parameter = options.parameter;
  pt.t_on = options.t_on;
  pt.duration = options.duration;
  pt.direction = options.direction;
  pt.h = options.h;
  const double baseline = model.parameter(options.parameter);

  auto setup = landscape::default_setup(eq, options.h, landscape_time(model, eq, options));
  setup.h = landscape::landscape_step(model, setup.x_lo, setup.x_hi, options.h);
  setup.solver = options.solver;

  std::optional<double> hi;
  std::optional<double> pulse;
  for (std::size_t i = 0; i < options.alphas.size(); ++i) {
    EnsembleEntry e;
    e.alpha = options.alphas[i];
    const fde::MemoryOrder order(e.alpha);
    try {
      e.basin = landscape::basin_metrics(landscape::model_landscape(model, order, setup));
    } catch (const Error& err) {
      e.notes.push_back(std::string("landscape: ") + err.what());
    }
    try {
      if (i == 0) hi = upper_bracket(model, order, pt, options.solver);
      if (!hi) throw MetricError("no tipping pulse found");
      double top = *hi;
      // memory can raise the threshold above the reference bracket, or remove it
      while (!e.resistance_unbounded &&
             classify_pulse(model, order, pt, top, options.solver) != ProbeOutcome::kTransitioned) {
        top *= 2.0;
        e.resistance_unbounded = top > options.unbounded_factor * *hi;
      }
      if (!e.resistance_unbounded) {
        e.resistance = resistance_search(model, order, pt, 0.0, top, options.tolerance, options.solver).p_star;
      }
    } catch (const Error& err) {
      e.notes.push_back(std::string("resistance: ") + err.what());
    }
    try {
      if (i == 0 && e.resistance) pulse = options.resilience_fraction * *e.resistance;
      if (!pulse) throw MetricError("no reference resistance to size the pulse");
      const auto sched = pt.schedule(baseline, *pulse);
      const auto r = resilience_index(model, order, sched, fde::SolverGrid(0.0, pt.t_end(), pt.h), options.solver);
      if (r.recovered) e.resilience = r.value;
      else if (r.transitioned) e.notes.push_back("resilience: pulse tipped the system");
      else {
        e.resilience_stalled = true;
        e.notes.push_back("resilience: no recovery within the horizon");
      }
    } catch (const Error& err) {
      e.notes.push_back(std::string("resilience: ") + err.what());
    }
    rec.entries.push_back(std::move(e));
  }
  return rec;
}

std::vector<EnsembleRecord> ensemble_study(const std::vector<models::RationalModel>& models,
                                           const EnsembleOptions& options) {
  std::vector<std::optional<EnsembleRecord>> slots(models.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < models.size(); i += stride) slots[i] = evaluate_model(models[i], i, options);
  };
  const std::size_t nt = std::max<std::size_t>(1, std::min<std::size_t>(options.threads, models.size()));
  if (nt == 1) {
    work(0, 1);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < nt; ++w) jobs.push_back(std::async(std::launch::async, work, w, nt));
    for (auto& j : jobs) j.get();
  }
  std::vector<EnsembleRecord> out;
  out.reserve(models.size());
  for (auto& r : slots) out.push_back(std::move(*r));
  std::vector<landscape::BasinMetrics> pooled;
  for (const auto& r : out) {
    for (const auto& e : r.entries) {
      if (e.basin) pooled.push_back(*e.basin);
    }
  }
  landscape::apply_ensemble_context(pooled);
  std::size_t k = 0;
  for (auto& r : out) {
    for (auto& e : r.entries) {
      if (e.basin) e.basin = pooled[k++];
    }
  }
  return out;
}

void write_ensemble_csv(const std::vector<EnsembleRecord>& records, const std::string& path,
                        const std::vector<std::string>& metadata) {
  util::CsvWriter csv(path,
                      {"model_id", "alpha", "a1", "a2", "a3", "depth", "curvature", "flatness", "sharpness", "resilience",
                       "resistance", "rel_resilience", "rel_resistance"},
                      metadata);
  auto num = [](const std::optional<double>& v) { return v ? util::format_number(*v) : std::string(); };
  for (const auto& r : records) {
    const auto a = r.model.coefficients();
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      const auto& e = r.entries[i];
      const auto& b = e.basin;
      csv.row(std::vector<std::string>{
          std::to_string(r.id), util::format_number(e.alpha), util::format_number(a[1]), util::format_number(a[2]),
          util::format_number(a[3]), b ? util::format_number(b->depth) : "", b ? util::format_number(b->curvature) : "",
          b ? num(b->flatness) : "", b ? num(b->sharpness) : "", e.resilience_stalled ? "stalled" : num(e.resilience),
          e.resistance_unbounded ? "inf" : num(e.resistance),
          i == 0 ? "" : num(r.relative_resilience(i)), i == 0 ? "" : num(r.relative_resistance(i))});
    }
  }
}

}  // namespace fracland::perturbation
