#include "fracland/models/rational_model.hpp"

#include <cmath>

#include "fracland/errors.hpp"

namespace fracland::models {

double quorum_degradation(double rho) {
  if (!(rho > 0.0 && rho < 2.0)) throw DomainError("quorum: rho must lie in (0, 2)");
  return 0.1 + (1.0 - rho) / (rho * (2.0 - rho));
}

RationalModel RationalModel::cubic(double a0, double a1, double a2, double a3) {
  RationalModel m;
  m.kind_ = ModelKind::kCubic;
  m.den_ = DenominatorKind::kOne;
  m.a_ = {a0, a1, a2, a3};
  return m;
}

RationalModel RationalModel::herbivory(const HerbivoryParams& p) {
  if (!(p.K > 0.0) || !(p.A > 0.0)) throw DomainError("herbivory: K and A must be positive");
  RationalModel m;
  m.kind_ = ModelKind::kHerbivory;
  m.den_ = DenominatorKind::kShifted;
  m.herb_ = p;
  m.c_ = p.A;
  m.a_ = {0.0, p.A * p.r - p.B, p.r * (1.0 - p.A / p.K), -p.r / p.K};
  return m;
}

RationalModel RationalModel::quorum(const QuorumParams& p) {
  if (!(p.K > 0.0)) throw DomainError("quorum: K must be positive");
  const double d = quorum_degradation(p.rho);
  RationalModel m;
  m.kind_ = ModelKind::kQuorum;
  m.den_ = DenominatorKind::kQuadratic;
  m.quorum_ = p;
  m.c_ = p.K;
  m.a_ = {p.x0 * p.K, -d * p.K, p.V + p.x0, -d};
  return m;
}

double RationalModel::q(double x) const noexcept {
  switch (den_) {
    case DenominatorKind::kOne: return 1.0;
    case DenominatorKind::kShifted: return c_ + x;
    case DenominatorKind::kQuadratic: return c_ + x * x;
  }
  return 1.0;
}

double RationalModel::dq(double x) const noexcept {
  switch (den_) {
    case DenominatorKind::kOne: return 0.0;
    case DenominatorKind::kShifted: return 1.0;
    case DenominatorKind::kQuadratic: return 2.0 * x;
  }
  return 0.0;
}

double RationalModel::drift(double x) const {
  const double qx = q(x);
  if (!(qx > 0.0)) throw DomainError("drift: q(x) <= 0 at x = " + std::to_string(x));
  return p(x) / qx;
}

double RationalModel::drift_derivative(double x) const {
  const double qx = q(x);
  if (!(qx > 0.0)) throw DomainError("drift_derivative: q(x) <= 0");
  return (dp(x) * qx - p(x) * dq(x)) / (qx * qx);
}

std::vector<std::string> RationalModel::parameter_names() const {
  switch (kind_) {
    case ModelKind::kCubic: return {"a0", "a1", "a2", "a3"};
    case ModelKind::kHerbivory: return {"r", "K", "A", "B"};
    case ModelKind::kQuorum: return {"V", "K", "x0", "rho"};
  }
  return {};
}

bool RationalModel::has_parameter(const std::string& name) const {
  for (const auto& n : parameter_names()) {
    if (n == name) return true;
  }
  return false;
}

double RationalModel::parameter(const std::string& name) const {
  switch (kind_) {
    case ModelKind::kCubic:
      if (name == "a0") return a_[0];
      if (name == "a1") return a_[1];
      if (name == "a2") return a_[2];
      if (name == "a3") return a_[3];
      break;
    case ModelKind::kHerbivory:
      if (name == "r") return herb_.r;
      if (name == "K") return herb_.K;
      if (name == "A") return herb_.A;
      if (name == "B") return herb_.B;
      break;
    case ModelKind::kQuorum:
      if (name == "V") return quorum_.V;
      if (name == "K") return quorum_.K;
      if (name == "x0") return quorum_.x0;
      if (name == "rho") return quorum_.rho;
      break;
  }
  throw ConfigError("unknown model parameter '" + name + "'");
}

RationalModel RationalModel::with_parameter(const std::string& name, double value) const {
  switch (kind_) {
    case ModelKind::kCubic: {
      auto a = a_;
      if (name == "a0") a[0] = value;
      else if (name == "a1") a[1] = value;
      else if (name == "a2") a[2] = value;
      else if (name == "a3") a[3] = value;
      else break;
      return cubic(a[0], a[1], a[2], a[3]);
    }
    case ModelKind::kHerbivory: {
      auto p = herb_;
      if (name == "r") p.r = value;
      else if (name == "K") p.K = value;
      else if (name == "A") p.A = value;
      else if (name == "B") p.B = value;
      else break;
      return herbivory(p);
    }
    case ModelKind::kQuorum: {
      auto p = quorum_;
      if (name == "V") p.V = value;
      else if (name == "K") p.K = value;
      else if (name == "x0") p.x0 = value;
      else if (name == "rho") p.rho = value;
      else break;
      return quorum(p);
    }
  }
  throw ConfigError("unknown model parameter '" + name + "'");
}

const HerbivoryParams& RationalModel::herbivory_params() const {
  if (kind_ != ModelKind::kHerbivory) throw CapabilityError("not a herbivory model");
  return herb_;
}

const QuorumParams& RationalModel::quorum_params() const {
  if (kind_ != ModelKind::kQuorum) throw CapabilityError("not a quorum model");
  return quorum_;
}

}  // namespace fracland::models
