#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fracland/errors.hpp"
#include "fracland/fde/caputo.hpp"
#include "fracland/models/equilibria.hpp"

namespace fracland::perturbation {

/// Recovery threshold (X_S2 - X_U) * 1e-4.
[[nodiscard]] double recovery_threshold(const models::EquilibriumSet& eq);

/// ((|x0 - xp| - |x0 - xn|) / (|x0 - xp| + |x0 - xn|)) / (t_n - t_p).
[[nodiscard]] double recovery_rate(double x0, double xp, double xn, double t_p, double t_n);

struct ResilienceResult {
  double x0 = 0.0;
  double xp = 0.0;
  double xn = 0.0;
  double t_p = 0.0;
  double t_n = 0.0;
  double threshold = 0.0;
  double value = 0.0;  ///< meaningful only when recovered
  bool recovered = false;
  bool transitioned = false;
};

/// Recovery-rate index
///   ((|X0 - Xp| - |X0 - Xn|) / (|X0 - Xp| + |X0 - Xn|)) / (t_n - t_p)
/// for a run that starts at the upper stable state X0 and is kicked by the single
/// offset window of `pulse`. t_n is the first grid time after t_p within the
/// recovery threshold of X0; the run stops there.
[[nodiscard]] ResilienceResult resilience_index(const models::RationalModel& model, fde::MemoryOrder order,
                                                const models::ParameterSchedule& pulse, const fde::SolverGrid& grid,
                                                const fde::SolverOptions& solver = {});

enum class ProbeOutcome { kReturned, kTransitioned, kUnresolved };

struct Probe {
  double magnitude = 0.0;
  ProbeOutcome outcome = ProbeOutcome::kUnresolved;
};

/// Pulse shape used by the resistance search; magnitude is the search variable.
struct PulseTemplate {
  std::string parameter;
  double t_on = 10.0;
  double duration = 10.0;
  double direction = 1.0;  ///< +1 raises the parameter, -1 lowers it
  /// Time simulated after the pulse; <= 0 means 10 * duration + 500.
  double horizon = 0.0;
  double h = 0.01;

  [[nodiscard]] double t_end() const;
  [[nodiscard]] models::ParameterSchedule schedule(double baseline, double magnitude) const;
};

struct ResistanceResult {
  double p_star = 0.0;
  double lower = 0.0;  ///< largest magnitude seen returning
  double upper = 0.0;  ///< smallest magnitude seen transitioning
  std::vector<Probe> probes;
  [[nodiscard]] double bracket_width() const { return upper - lower; }
};

/// Bisection failure: outcomes inconsistent with a single threshold, or an
/// unresolved probe. Carries every probe made so far.
class BracketAnomaly : public MetricError {
 public:
  BracketAnomaly(const std::string& what, std::vector<Probe> probes)
      : MetricError(what), probes_(std::move(probes)) {}
  [[nodiscard]] const std::vector<Probe>& probes() const noexcept { return probes_; }

 private:
  std::vector<Probe> probes_;
};

/// Simulates one pulse and labels the end state. Runs stop once the state enters
/// the threshold band of either stable state after the pulse. A run that reaches
/// the horizon outside both bands is labelled by the side of X_U it ends on;
/// divergence or ending on X_U is unresolved.
[[nodiscard]] ProbeOutcome classify_pulse(const models::RationalModel& model, fde::MemoryOrder order,
                                          const PulseTemplate& pulse, double magnitude,
                                          const fde::SolverOptions& solver = {});

/// Minimal tipping magnitude by bisection on [lo, hi] down to `tolerance`.
[[nodiscard]] ResistanceResult resistance_search(const models::RationalModel& model, fde::MemoryOrder order,
                                                 const PulseTemplate& pulse, double lo, double hi,
                                                 double tolerance = 5e-4, const fde::SolverOptions& solver = {});

/// (a - b) / (a + b); throws MetricError when both are zero or either is negative.
[[nodiscard]] double relative_effect(double with_memory, double without_memory);

}  // namespace fracland::perturbation
