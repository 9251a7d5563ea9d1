#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fracland/landscape/landscape.hpp"
#include "fracland/perturbation/metrics.hpp"

namespace fracland::perturbation {

struct EnsembleOptions {
  /// Memory orders per model; the first is the reference for relative effects.
  std::vector<double> alphas{1.0, 0.8};
  std::string parameter = "a1";
  double direction = -1.0;  ///< lowering a1 pushes the state towards X_S1
  double t_on = 10.0;
  double duration = 10.0;
  /// Resilience pulse as a fraction of the reference resistance.
  double resilience_fraction = 0.5;
  double h = 0.01;
  double tolerance = 5e-4;
  /// No tip below this multiple of the reference bracket marks resistance as unbounded.
  double unbounded_factor = 64.0;
  /// Landscape run length; <= 0 scales with the slowest relaxation rate.
  double landscape_t_end = 0.0;
  fde::SolverOptions solver{.history = fde::HistoryMethod::kFft};
  /// Models evaluated concurrently; results do not depend on it.
  unsigned threads = 1;
};

struct EnsembleEntry {
  double alpha = 1.0;
  std::optional<landscape::BasinMetrics> basin;
  std::optional<double> resilience;
  std::optional<double> resistance;
  bool resistance_unbounded = false;  ///< no pulse up to the search cap tipped the system
  bool resilience_stalled = false;     ///< neither recovered nor tipped within the horizon
  std::vector<std::string> notes;  ///< reasons for missing metrics
};

struct EnsembleRecord {
  std::size_t id = 0;
  models::RationalModel model;
  std::vector<EnsembleEntry> entries;

  /// relative_effect(entry i, entry 0) when both are defined; an unbounded
  /// resistance counts as +1 against a finite one, a stalled recovery as -1.
  [[nodiscard]] std::optional<double> relative_resilience(std::size_t i) const;
  [[nodiscard]] std::optional<double> relative_resistance(std::size_t i) const;
};

/// Landscape, resistance and resilience of one model at every order in `options`.
/// Failures are recorded in the entry notes rather than thrown.
[[nodiscard]] EnsembleRecord evaluate_model(const models::RationalModel& model, std::size_t id,
                                            const EnsembleOptions& options = {});

/// evaluate_model over all models, then flatness and sharpness over the pooled basins.
[[nodiscard]] std::vector<EnsembleRecord> ensemble_study(const std::vector<models::RationalModel>& models,
                                                         const EnsembleOptions& options = {});

/// One row per (model, alpha).
void write_ensemble_csv(const std::vector<EnsembleRecord>& records, const std::string& path,
                        const std::vector<std::string>& metadata = {});

}  // namespace fracland::perturbation
