#pragma once

#include <optional>
#include <vector>

#include "fracland/fde/grid.hpp"
#include "fracland/fde/volterra.hpp"
#include "fracland/models/rational_model.hpp"
#include "fracland/models/schedule.hpp"

namespace fracland::fde {

/// Solution on a uniform grid, tagged with what produced it.
struct Trajectory {
  std::vector<double> t;
  std::vector<double> x;
  MemoryOrder order{1.0};
  double h = 0.0;
  std::optional<models::RationalModel> model;
  std::optional<models::ParameterSchedule> schedule;
  bool stopped_early = false;
};

/// Node-wise drift of a model whose named parameter follows a schedule.
class ScheduledDrift {
 public:
  ScheduledDrift(const models::RationalModel& model, const std::optional<models::ParameterSchedule>& schedule,
                 const SolverGrid& grid);
  [[nodiscard]] double operator()(std::size_t n, double x);
  [[nodiscard]] const models::RationalModel& model_at(std::size_t n);

 private:
  models::RationalModel base_;
  std::string parameter_;
  std::vector<double> values_;
  std::optional<models::RationalModel> cached_;
  double cached_value_ = 0.0;
};

/// Caputo solve of dx/dt = p(x)/q(x) with the scheduled parameter.
[[nodiscard]] Trajectory solve_caputo(const models::RationalModel& model,
                                      const std::optional<models::ParameterSchedule>& schedule,
                                      MemoryOrder order, double x0, const SolverGrid& grid,
                                      const SolverOptions& options = {}, const StopRule& stop = {});

/// Caputo solve for an arbitrary node-wise drift.
[[nodiscard]] Trajectory solve_caputo(const NodeDrift& drift, MemoryOrder order, double x0,
                                      const SolverGrid& grid, const SolverOptions& options = {});

}  // namespace fracland::fde
