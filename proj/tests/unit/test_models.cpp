#include <cmath>
#include <random>

#include "doctest.h"
#include "fracland/models/equilibria.hpp"
#include "fracland/models/rational_model.hpp"
#include "fracland/models/schedule.hpp"

using namespace fracland;
using namespace fracland::models;

TEST_CASE("drift examples") {
  auto herb = RationalModel::herbivory({0.8, 3.0, 0.2, 0.6});
  CHECK(herb.drift(0.0) == 0.0);
  CHECK(herb.coefficients()[3] == doctest::Approx(-0.8 / 3.0));
  auto quorum = RationalModel::quorum({3.0, 1.0, 0.05, 0.4});
  CHECK(quorum.drift(0.0) == doctest::Approx(0.05));
  CHECK_THROWS_AS((void)herb.drift(-0.3), DomainError);
}

TEST_CASE("parameter mapping round trip") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ux(0.0, 5.0);
  const HerbivoryParams hp{0.8, 3.0, 0.2, 0.6};
  const QuorumParams qp{3.0, 1.0, 0.05, 0.38};
  auto herb = RationalModel::herbivory(hp);
  auto quorum = RationalModel::quorum(qp);
  const double d = 0.1 + (1 - qp.rho) / (qp.rho * (2 - qp.rho));
  for (int i = 0; i < 100; ++i) {
    const double x = ux(rng);
    const double direct_h = hp.r * x * (1 - x / hp.K) - hp.B * x / (hp.A + x);
    const double direct_q = qp.V * x * x / (qp.K + x * x) + qp.x0 - d * x;
    CHECK(std::abs(herb.drift(x) - direct_h) <= 1e-12 * std::max(1.0, std::abs(direct_h)));
    CHECK(std::abs(quorum.drift(x) - direct_q) <= 1e-12 * std::max(1.0, std::abs(direct_q)));
  }
}

TEST_CASE("with_parameter remaps coefficients") {
  auto herb = RationalModel::herbivory({0.8, 3.0, 0.2, 0.6});
  auto h2 = herb.with_parameter("B", 1.0);
  CHECK(h2.coefficients()[1] == doctest::Approx(0.2 * 0.8 - 1.0));
  CHECK(h2.parameter("B") == 1.0);
  CHECK_THROWS_AS((void)herb.with_parameter("rho", 0.3), ConfigError);
}

TEST_CASE("symmetric double well equilibria") {
  auto eq = equilibria(RationalModel::cubic(0.0, 1.0, 0.0, -1.0));
  REQUIRE(eq.roots.size() == 3);
  CHECK(eq.roots[0].x == doctest::Approx(-1.0));
  CHECK(eq.roots[1].x == doctest::Approx(0.0));
  CHECK(eq.roots[2].x == doctest::Approx(1.0));
  CHECK(eq.bistable());
}

TEST_CASE("herbivory and quorum equilibria") {
  // K = 3 folds at B = 0.683, so B = 1 needs the larger carrying capacity
  CHECK_FALSE(equilibria(RationalModel::herbivory({0.8, 3.0, 0.2, 1.0})).bistable());
  auto herb = RationalModel::herbivory({0.8, 6.0, 0.2, 1.0});
  auto eq = equilibria(herb);
  REQUIRE(eq.bistable());
  // roots of r(1 - x/K)(A + x) = B by the quadratic formula
  const double a = -0.8 / 6.0, b = 0.8 * (1.0 - 0.2 / 6.0), c = 0.8 * 0.2 - 1.0;
  const double disc = std::sqrt(b * b - 4 * a * c);
  CHECK(eq.unstable() == doctest::Approx((-b + disc) / (2 * a)).epsilon(1e-12));
  CHECK(eq.upper_stable() == doctest::Approx((-b - disc) / (2 * a)).epsilon(1e-12));
  CHECK(eq.lower_stable() == doctest::Approx(0.0));

  auto base = equilibria(RationalModel::herbivory({0.8, 3.0, 0.2, 0.6}));
  CHECK(base.upper_stable() == doctest::Approx(1.9568).epsilon(1e-4));
  CHECK(base.unstable() == doctest::Approx(0.8432).epsilon(1e-4));

  CHECK(equilibria(RationalModel::quorum({3.0, 1.0, 0.05, 0.38})).bistable());
}

TEST_CASE("stability labels match finite differences") {
  for (auto m : {RationalModel::herbivory({0.8, 6.0, 0.2, 1.0}), RationalModel::quorum({3.0, 1.0, 0.05, 0.38}),
                 RationalModel::cubic(0.0, -0.5, 2.0, -1.0)}) {
    for (const auto& r : equilibria(m).roots) {
      const double e = 1e-6;
      const double fd = (m.drift(r.x + e) - m.drift(r.x - e)) / (2 * e);
      CHECK((fd < 0) == (r.stability == Stability::kStable));
    }
  }
}

TEST_CASE("degenerate and monostable cases") {
  auto quad = equilibria(RationalModel::cubic(0.0, -1.0, 1.0, 0.0));
  CHECK(quad.degenerate);
  CHECK(quad.roots.size() == 2);
  auto mono = RationalModel::cubic(0.0, -1.0, 1.0, -1.0);  // a2^2 < 4 a1 a3
  CHECK(equilibria(mono).roots.size() == 1);
  auto sweep = bifurcation_sweep(mono, "a0", -0.1, 0.1, 21);
  CHECK(sweep.folds.empty());
}

TEST_CASE("herbivory upper fold") {
  auto sweep = bifurcation_sweep(RationalModel::herbivory({0.8, 6.0, 0.2, 0.6}), "B", 0.2, 2.0, 181);
  REQUIRE(sweep.folds.size() == 1);
  // max_x r(1 - x/K)(A + x) is attained at x = (K - A)/2
  const double x = (6.0 - 0.2) / 2.0;
  CHECK(sweep.folds[0].parameter == doctest::Approx(0.8 * (1 - x / 6.0) * (0.2 + x)).epsilon(2e-6));
  CHECK(sweep.folds[0].state == doctest::Approx(x).epsilon(1e-3));

  auto fitted = bifurcation_sweep(RationalModel::herbivory({0.5726, 5.8242, 0.1112, 0.5}), "B", 0.12, 2.0, 95);
  REQUIRE(fitted.folds.size() == 1);
  CHECK(fitted.folds[0].parameter == doctest::Approx(0.8).epsilon(0.1));
}

TEST_CASE("fold count along a sweep is even unless truncated") {
  auto m = RationalModel::cubic(0.0, 1.0, 0.0, -1.0);
  auto sweep = bifurcation_sweep(m, "a0", -1.0, 1.0, 201);
  CHECK(sweep.folds.size() == 2);
  const double fold = 2.0 / (3.0 * std::sqrt(3.0));
  CHECK(sweep.folds[0].parameter == doctest::Approx(-fold).epsilon(1e-5));
  CHECK(sweep.folds[1].parameter == doctest::Approx(fold).epsilon(1e-5));
}

TEST_CASE("ensemble sampling") {
  auto a = sample_ensemble(300, 42);
  auto b = sample_ensemble(300, 42);
  REQUIRE(a.size() == 300);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].coefficients() == b[i].coefficients());
    const auto& c = a[i].coefficients();
    CHECK(c[0] == 0.0);
    CHECK(c[1] < 0.0);
    CHECK(c[3] < 0.0);
    // brute-force sign changes of p on a fine grid
    int changes = 0;
    const double span = 2.0 * c[2] / -c[3] + 1.0;
    double prev = a[i].p(-1e-6);
    for (int k = 1; k <= 200000; ++k) {
      const double x = -1e-6 + k * span / 200000;
      const double v = a[i].p(x);
      if ((v > 0) != (prev > 0)) ++changes;
      prev = v;
    }
    CHECK(changes == 3);
    auto eq = equilibria(a[i]);
    CHECK(eq.bistable());
    CHECK(eq.upper_stable() > 0.0);
  }
  CHECK_THROWS_AS((void)sample_ensemble(5, 1, {0.1, 1.0, -2.0, -0.05}), ConfigError);
}

TEST_CASE("schedules") {
  auto pulse = ParameterSchedule::pulse("B", 0.6, 0.275, 10.0, 20.0, 0.0, 100.0);
  CHECK(pulse.value(15.0) == doctest::Approx(0.875));
  CHECK(pulse.value(25.0) == doctest::Approx(0.6));
  auto ramp = ParameterSchedule::ramp("rho", 0.38, 0.29, 250.0, true, 0.0, 1000.0);
  CHECK(ramp.value(125.0) == doctest::Approx(0.335));
  CHECK(ramp.value(250.0) == doctest::Approx(0.29));
  CHECK(ramp.value(375.0) == doctest::Approx(0.335));
  CHECK(ramp.value(900.0) == doctest::Approx(0.38));
  auto step = ParameterSchedule::step("rho", 0.4, 0.29, 100.0, 0.0, 500.0);
  CHECK(step.value(99.0) == 0.4);
  CHECK(step.value(101.0) == 0.29);
  CHECK(smoothstep(0.0) == 0.0);
  CHECK(smoothstep(1.0) == 1.0);
  CHECK_THROWS_AS(ParameterSchedule("B", 0.0, {{0, 10, SegmentShape::kConstant, 1, 0}, {5, 20, SegmentShape::kConstant, 2, 0}}),
                  ConfigError);

  fde::SolverGrid g(0.0, 100.0, 0.01);
  auto s = pulse.sample(g);
  CHECK(s[999] == doctest::Approx(0.6));
  CHECK(s[1000] == doctest::Approx(0.875));
  CHECK(s[1999] == doctest::Approx(0.875));
  CHECK(s[2000] == doctest::Approx(0.6));
}
