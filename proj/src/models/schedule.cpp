#include "fracland/models/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "fracland/errors.hpp"

namespace fracland::models {

double smoothstep(double u) noexcept {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
}

ParameterSchedule::ParameterSchedule(std::string parameter, double baseline,
                                     std::vector<ScheduleSegment> segments)
    : parameter_(std::move(parameter)), baseline_(baseline), segments_(std::move(segments)) {
  if (segments_.empty()) throw ConfigError("schedule: no segments");
  constexpr double tol = 1e-9;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (!(s.t_end > s.t_start)) throw ConfigError("schedule: segment with t_end <= t_start");
    if (i > 0) {
      const double gap = s.t_start - segments_[i - 1].t_end;
      if (gap < -tol) throw ConfigError("schedule: overlapping segments");
      if (gap > tol) throw ConfigError("schedule: gap between segments");
    }
  }
}

ParameterSchedule ParameterSchedule::constant(std::string parameter, double value, double t0, double t_end) {
  return ParameterSchedule(std::move(parameter), value, {{t0, t_end, SegmentShape::kOffset, 0.0, 0.0}});
}

ParameterSchedule ParameterSchedule::pulse(std::string parameter, double baseline, double offset, double t_on,
                                           double t_off, double t0, double t_end) {
  if (!(t_on >= t0 && t_off > t_on && t_off <= t_end)) throw ConfigError("pulse: window outside [t0, t_end]");
  std::vector<ScheduleSegment> segs;
  if (t_on > t0) segs.push_back({t0, t_on, SegmentShape::kOffset, 0.0, 0.0});
  segs.push_back({t_on, t_off, SegmentShape::kOffset, offset, 0.0});
  if (t_end > t_off) segs.push_back({t_off, t_end, SegmentShape::kOffset, 0.0, 0.0});
  return ParameterSchedule(std::move(parameter), baseline, std::move(segs));
}

ParameterSchedule ParameterSchedule::step(std::string parameter, double before, double after, double t_step,
                                          double t0, double t_end) {
  if (!(t_step > t0 && t_step < t_end)) throw ConfigError("step: switch time outside (t0, t_end)");
  return ParameterSchedule(std::move(parameter), before,
                           {{t0, t_step, SegmentShape::kConstant, before, 0.0},
                            {t_step, t_end, SegmentShape::kConstant, after, 0.0}});
}

ParameterSchedule ParameterSchedule::ramp(std::string parameter, double from, double to, double ramp_time,
                                          bool ramp_back, double t0, double t_end) {
  const double span = ramp_back ? 2.0 * ramp_time : ramp_time;
  if (!(ramp_time > 0.0) || t0 + span > t_end) throw ConfigError("ramp: ramps do not fit in [t0, t_end]");
  std::vector<ScheduleSegment> segs{{t0, t0 + ramp_time, SegmentShape::kSmoothstep, from, to}};
  if (ramp_back) segs.push_back({t0 + ramp_time, t0 + span, SegmentShape::kSmoothstep, to, from});
  if (t_end > t0 + span) {
    segs.push_back({t0 + span, t_end, SegmentShape::kConstant, ramp_back ? from : to, 0.0});
  }
  return ParameterSchedule(std::move(parameter), from, std::move(segs));
}

double ParameterSchedule::segment_value(const ScheduleSegment& s, double t) const {
  switch (s.shape) {
    case SegmentShape::kConstant: return s.v0;
    case SegmentShape::kOffset: return baseline_ + s.v0;
    case SegmentShape::kSmoothstep:
      return s.v0 + (s.v1 - s.v0) * smoothstep((t - s.t_start) / (s.t_end - s.t_start));
  }
  return baseline_;
}

double ParameterSchedule::value(double t) const {
  if (t <= segments_.front().t_start) return segment_value(segments_.front(), segments_.front().t_start);
  for (const auto& s : segments_) {
    if (t < s.t_end) return segment_value(s, t);
  }
  return segment_value(segments_.back(), std::min(t, segments_.back().t_end));
}

std::vector<double> ParameterSchedule::sample(const fde::SolverGrid& grid) const {
  std::vector<double> out(grid.n_steps() + 1);
  std::size_t seg = 0;
  for (std::size_t n = 0; n < out.size(); ++n) {
    while (seg + 1 < segments_.size() && n >= grid.node(segments_[seg].t_end)) ++seg;
    const auto& s = segments_[seg];
    const double t = std::clamp(grid.time(n), s.t_start, s.t_end);
    out[n] = segment_value(s, t);
  }
  return out;
}

}  // namespace fracland::models
