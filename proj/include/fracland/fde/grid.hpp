#pragma once

#include <cmath>
#include <cstddef>

#include "fracland/errors.hpp"

namespace fracland::fde {

/// Caputo order alpha in (0, 1]; memory strength is 1 - alpha.
class MemoryOrder {
 public:
  explicit MemoryOrder(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("MemoryOrder: alpha must lie in (0, 1]");
  }
  static MemoryOrder from_memory(double memory) { return MemoryOrder(1.0 - memory); }

  [[nodiscard]] double alpha() const noexcept { return alpha_; }
  [[nodiscard]] double memory_strength() const noexcept { return 1.0 - alpha_; }
  [[nodiscard]] bool memoryless() const noexcept { return alpha_ == 1.0; }

 private:
  double alpha_;
};

/// Uniform grid t_n = t0 + n h, n = 0..n_steps.
class SolverGrid {
 public:
  SolverGrid(double t0, double t_end, double h) : t0_(t0), h_(h) {
    if (!(h > 0.0) || !(t_end > t0) || !std::isfinite(t_end) || !std::isfinite(t0)) {
      throw DomainError("SolverGrid: need h > 0 and t_end > t0");
    }
    n_steps_ = static_cast<std::size_t>(std::llround((t_end - t0) / h));
    if (n_steps_ < 2) throw DomainError("SolverGrid: fewer than two steps");
  }

  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double h() const noexcept { return h_; }
  [[nodiscard]] std::size_t n_steps() const noexcept { return n_steps_; }
  [[nodiscard]] double t_end() const noexcept { return time(n_steps_); }
  [[nodiscard]] double time(std::size_t n) const noexcept { return t0_ + static_cast<double>(n) * h_; }
  /// Nearest node index for time t, clamped to the grid.
  [[nodiscard]] std::size_t node(double t) const noexcept {
    const double k = std::round((t - t0_) / h_);
    if (k <= 0.0) return 0;
    if (k >= static_cast<double>(n_steps_)) return n_steps_;
    return static_cast<std::size_t>(k);
  }

 private:
  double t0_;
  double h_;
  std::size_t n_steps_;
};

}  // namespace fracland::fde
