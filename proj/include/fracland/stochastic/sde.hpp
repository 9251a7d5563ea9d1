#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fracland/fde/caputo.hpp"

namespace fracland::stochastic {

enum class NoiseKind { kAdditive, kMultiplicative };

/// Additive: g(x) = sigma. Multiplicative: g(x) = sigma * max(1 - beta x^2, 0),
/// evaluated at the left end point of each step.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kAdditive;
  double sigma = 0.0;
  double beta = 1.0;
  std::uint64_t seed = 0;

  [[nodiscard]] double amplitude(double x) const;
  void validate() const;
};

/// n standard normal increments from a 64-bit Mersenne Twister seeded with `seed`.
[[nodiscard]] std::vector<double> noise_path(std::size_t n, std::uint64_t seed);

/// Caputo SDE D^alpha x = F(x) + g(x) xi(t), xi piecewise constant eta_n / sqrt(h).
/// At alpha = 1 the noise enters as g(x_n) sqrt(h) eta_n per step.
/// Uses `path` when given (length >= n_steps), otherwise draws one from noise.seed.
[[nodiscard]] fde::Trajectory simulate_sde(const models::RationalModel& model,
                                           const std::optional<models::ParameterSchedule>& schedule,
                                           fde::MemoryOrder order, const NoiseSpec& noise, double x0,
                                           const fde::SolverGrid& grid, const fde::SolverOptions& options = {},
                                           std::span<const double> path = {});

[[nodiscard]] fde::Trajectory simulate_sde(const models::RationalModel& model, fde::MemoryOrder order,
                                           const NoiseSpec& noise, double x0, const fde::SolverGrid& grid,
                                           const fde::SolverOptions& options = {}, std::span<const double> path = {});

/// Drops the first `burn_in` time units.
[[nodiscard]] std::vector<double> after_burn_in(const fde::Trajectory& tr, double burn_in);

}  // namespace fracland::stochastic
