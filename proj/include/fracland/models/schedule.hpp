#pragma once

#include <string>
#include <vector>

#include "fracland/fde/grid.hpp"

namespace fracland::models {

enum class SegmentShape {
  kConstant,    ///< value = v0
  kOffset,      ///< value = baseline + v0
  kSmoothstep,  ///< value = v0 + (v1 - v0) s(u)
};

struct ScheduleSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  SegmentShape shape = SegmentShape::kConstant;
  double v0 = 0.0;
  double v1 = 0.0;
};

/// s(u) = u^3 (10 - 15u + 6u^2) on [0, 1], clamped outside.
[[nodiscard]] double smoothstep(double u) noexcept;

/// Time course of one control parameter. Segments are half-open [t_start, t_end)
/// except the last, which is closed.
class ParameterSchedule {
 public:
  ParameterSchedule(std::string parameter, double baseline, std::vector<ScheduleSegment> segments);

  /// Baseline everywhere on [t0, t_end].
  static ParameterSchedule constant(std::string parameter, double value, double t0, double t_end);
  /// Baseline, plus offset on [t_on, t_off].
  static ParameterSchedule pulse(std::string parameter, double baseline, double offset, double t_on,
                                 double t_off, double t0, double t_end);
  /// before for t < t_step, after from t_step on.
  static ParameterSchedule step(std::string parameter, double before, double after, double t_step,
                                double t0, double t_end);
  /// Smoothstep ramp from -> to over [t0, t0 + ramp], then back to -> from over the next ramp,
  /// then constant; set ramp_back to false for a one-way ramp.
  static ParameterSchedule ramp(std::string parameter, double from, double to, double ramp_time,
                                bool ramp_back, double t0, double t_end);

  [[nodiscard]] const std::string& parameter() const noexcept { return parameter_; }
  [[nodiscard]] double baseline() const noexcept { return baseline_; }
  [[nodiscard]] const std::vector<ScheduleSegment>& segments() const noexcept { return segments_; }
  [[nodiscard]] double t_begin() const noexcept { return segments_.front().t_start; }
  [[nodiscard]] double t_end() const noexcept { return segments_.back().t_end; }

  /// Value at time t; t is clamped to the covered interval.
  [[nodiscard]] double value(double t) const;
  /// Values at every grid node. Segment boundaries snap to the nearest node.
  [[nodiscard]] std::vector<double> sample(const fde::SolverGrid& grid) const;

 private:
  [[nodiscard]] double segment_value(const ScheduleSegment& s, double t) const;

  std::string parameter_;
  double baseline_;
  std::vector<ScheduleSegment> segments_;
};

}  // namespace fracland::models
