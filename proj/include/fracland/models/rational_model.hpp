#pragma once

#include <array>
#include <string>
#include <vector>

namespace fracland::models {

enum class ModelKind { kCubic, kHerbivory, kQuorum };

/// q(x) = 1, A + x, or K + x^2.
enum class DenominatorKind { kOne, kShifted, kQuadratic };

struct HerbivoryParams {
  double r = 0.8;
  double K = 3.0;
  double A = 0.2;
  double B = 0.6;
};

struct QuorumParams {
  double V = 3.0;
  double K = 1.0;
  double x0 = 0.05;
  double rho = 0.4;
};

/// Degradation rate of the quorum model.
[[nodiscard]] double quorum_degradation(double rho);

/// Drift F(x) = p(x)/q(x) with p(x) = a3 x^3 + a2 x^2 + a1 x + a0.
class RationalModel {
 public:
  static RationalModel cubic(double a0, double a1, double a2, double a3);
  static RationalModel herbivory(const HerbivoryParams& p);
  static RationalModel quorum(const QuorumParams& p);

  [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
  [[nodiscard]] DenominatorKind denominator() const noexcept { return den_; }
  /// a0..a3.
  [[nodiscard]] const std::array<double, 4>& coefficients() const noexcept { return a_; }
  /// Shift in q: A for herbivory, K for quorum, unused for cubic.
  [[nodiscard]] double denominator_constant() const noexcept { return c_; }

  [[nodiscard]] double p(double x) const noexcept { return ((a_[3] * x + a_[2]) * x + a_[1]) * x + a_[0]; }
  [[nodiscard]] double dp(double x) const noexcept { return (3.0 * a_[3] * x + 2.0 * a_[2]) * x + a_[1]; }
  [[nodiscard]] double q(double x) const noexcept;
  [[nodiscard]] double dq(double x) const noexcept;

  /// p/q; throws DomainError where q(x) <= 0.
  [[nodiscard]] double drift(double x) const;
  /// d(p/q)/dx.
  [[nodiscard]] double drift_derivative(double x) const;

  [[nodiscard]] std::vector<std::string> parameter_names() const;
  [[nodiscard]] double parameter(const std::string& name) const;
  /// Copy with one named parameter replaced and coefficients remapped.
  [[nodiscard]] RationalModel with_parameter(const std::string& name, double value) const;
  [[nodiscard]] bool has_parameter(const std::string& name) const;

  [[nodiscard]] const HerbivoryParams& herbivory_params() const;
  [[nodiscard]] const QuorumParams& quorum_params() const;

 private:
  RationalModel() = default;

  ModelKind kind_ = ModelKind::kCubic;
  DenominatorKind den_ = DenominatorKind::kOne;
  std::array<double, 4> a_{};
  double c_ = 0.0;
  HerbivoryParams herb_{};
  QuorumParams quorum_{};
};

}  // namespace fracland::models
