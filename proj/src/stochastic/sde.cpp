#include "fracland/stochastic/sde.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fracland/errors.hpp"

namespace fracland::stochastic {

double NoiseSpec::amplitude(double x) const {
  if (kind == NoiseKind::kAdditive) return sigma;
  return sigma * std::max(1.0 - beta * x * x, 0.0);
}

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("noise: amplitude must be finite and >= 0");
  if (kind == NoiseKind::kMultiplicative && !(beta > 0.0)) throw DomainError("noise: beta must be positive");
}

std::vector<double> noise_path(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eta(n);
  for (auto& e : eta) e = normal(rng);
  return eta;
}

fde::Trajectory simulate_sde(const models::RationalModel& model,
                             const std::optional<models::ParameterSchedule>& schedule, fde::MemoryOrder order,
                             const NoiseSpec& noise, double x0, const fde::SolverGrid& grid,
                             const fde::SolverOptions& options, std::span<const double> path) {
  noise.validate();
  std::vector<double> own;
  if (path.empty()) {
    own = noise_path(grid.n_steps(), noise.seed);
    path = own;
  }
  if (path.size() < grid.n_steps()) throw DomainError("simulate_sde: noise path shorter than the grid");
  fde::ScheduledDrift sd(model, schedule, grid);
  fde::NodeDrift drift = [&sd](std::size_t n, double x) { return sd(n, x); };
  fde::NoiseDrive drive{path, [&noise](double x) { return noise.amplitude(x); }};
  auto res = fde::integrate_volterra(drift, order, x0, grid, options, &drive);
  fde::Trajectory tr;
  tr.order = order;
  tr.h = grid.h();
  tr.x = std::move(res.x);
  tr.t.resize(tr.x.size());
  for (std::size_t n = 0; n < tr.t.size(); ++n) tr.t[n] = grid.time(n);
  tr.model = model;
  tr.schedule = schedule;
  return tr;
}

fde::Trajectory simulate_sde(const models::RationalModel& model, fde::MemoryOrder order, const NoiseSpec& noise,
                             double x0, const fde::SolverGrid& grid, const fde::SolverOptions& options,
                             std::span<const double> path) {
  return simulate_sde(model, std::nullopt, order, noise, x0, grid, options, path);
}

std::vector<double> after_burn_in(const fde::Trajectory& tr, double burn_in) {
  const auto skip = static_cast<std::size_t>(std::llround(burn_in / tr.h));
  if (skip >= tr.x.size()) throw SizingError("burn-in longer than the trajectory");
  return {tr.x.begin() + static_cast<std::ptrdiff_t>(skip), tr.x.end()};
}

}  // namespace fracland::stochastic
