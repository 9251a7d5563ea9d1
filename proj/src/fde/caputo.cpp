#include "fracland/fde/caputo.hpp"

namespace fracland::fde {

ScheduledDrift::ScheduledDrift(const models::RationalModel& model,
                               const std::optional<models::ParameterSchedule>& schedule, const SolverGrid& grid)
    : base_(model) {
  if (schedule) {
    parameter_ = schedule->parameter();
    if (!model.has_parameter(parameter_)) {
      throw ConfigError("schedule targets unknown parameter '" + parameter_ + "'");
    }
    values_ = schedule->sample(grid);
  }
}

const models::RationalModel& ScheduledDrift::model_at(std::size_t n) {
  if (values_.empty()) return base_;
  const double v = values_[std::min(n, values_.size() - 1)];
  if (!cached_ || v != cached_value_) {
    cached_ = base_.with_parameter(parameter_, v);
    cached_value_ = v;
  }
  return *cached_;
}

double ScheduledDrift::operator()(std::size_t n, double x) { return model_at(n).drift(x); }

namespace {
Trajectory package(VolterraResult res, MemoryOrder order, const SolverGrid& grid) {
  Trajectory tr;
  tr.order = order;
  tr.h = grid.h();
  tr.x = std::move(res.x);
  tr.t.resize(tr.x.size());
  for (std::size_t n = 0; n < tr.t.size(); ++n) tr.t[n] = grid.time(n);
  tr.stopped_early = res.stopped_early;
  return tr;
}
}  // namespace

Trajectory solve_caputo(const models::RationalModel& model, const std::optional<models::ParameterSchedule>& schedule,
                        MemoryOrder order, double x0, const SolverGrid& grid, const SolverOptions& options,
                        const StopRule& stop) {
  ScheduledDrift sd(model, schedule, grid);
  NodeDrift drift = [&sd](std::size_t n, double x) { return sd(n, x); };
  Trajectory tr = package(integrate_volterra(drift, order, x0, grid, options, nullptr, stop), order, grid);
  tr.model = model;
  tr.schedule = schedule;
  return tr;
}

Trajectory solve_caputo(const NodeDrift& drift, MemoryOrder order, double x0, const SolverGrid& grid,
                        const SolverOptions& options) {
  return package(integrate_volterra(drift, order, x0, grid, options), order, grid);
}

}  // namespace fracland::fde
