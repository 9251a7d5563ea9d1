#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "fracland/fde/caputo.hpp"
#include "fracland/fde/mittag_leffler.hpp"
#include "fracland/fde/volterra.hpp"

using namespace fracland;
using namespace fracland::fde;

namespace {

using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<160>>;

// Plain series in 160-digit arithmetic, summed until the terms fall below 1e-40.
double ml_reference(double alpha, double beta, double z) {
  Big sum = 0;
  Big zpow = 1;
  Big bz = z;
  bool past_peak = false;
  Big prev = 0;
  for (int k = 0; k < 6000; ++k) {
    Big term = zpow / boost::multiprecision::tgamma(Big(alpha) * k + Big(beta));
    sum += term;
    Big mag = abs(term);
    if (k > 0 && mag < prev) past_peak = true;
    if (past_peak && mag < Big("1e-30")) return static_cast<double>(sum);
    prev = mag;
    zpow *= bz;
  }
  FAIL("reference series did not converge");
  return 0.0;
}

double linear_drift(std::size_t, double y) { return -2.0 * y; }

// Classical RK4 on the same grid with a frozen-node drift.
std::vector<double> rk4(const std::function<double(double, double)>& f, double x0, const SolverGrid& g) {
  std::vector<double> x(g.n_steps() + 1);
  x[0] = x0;
  const double h = g.h();
  for (std::size_t n = 0; n < g.n_steps(); ++n) {
    const double t = g.time(n);
    const double k1 = f(t, x[n]);
    const double k2 = f(t + h / 2, x[n] + h / 2 * k1);
    const double k3 = f(t + h / 2, x[n] + h / 2 * k2);
    const double k4 = f(t + h, x[n] + h * k3);
    x[n + 1] = x[n] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

}  // namespace

TEST_CASE("mittag_leffler closed forms") {
  CHECK(mittag_leffler(1.0, 1.0, 1.0) == doctest::Approx(std::numbers::e).epsilon(1e-14));
  CHECK(mittag_leffler(0.8, 0.8, 0.0) == doctest::Approx(1.0 / std::tgamma(0.8)).epsilon(1e-14));
  CHECK(mittag_leffler(1.0, 2.0, 1.0) == doctest::Approx(std::numbers::e - 1.0).epsilon(1e-14));
  CHECK(mittag_leffler(1.0, 1.0, -25.0) == doctest::Approx(std::exp(-25.0)).epsilon(1e-12));
  CHECK(mittag_leffler(0.5, 1.0, -1.5) ==
        doctest::Approx(std::exp(2.25) * std::erfc(1.5)).epsilon(1e-12));
}

TEST_CASE("mittag_leffler matches high precision series for |z| <= 30") {
  const double alphas[] = {0.6, 0.8, 1.0};
  const double zs[] = {-30.0, -12.0, -3.0, -0.7, 2.0, 9.0};
  for (double a : alphas) {
    for (double b : {a, 1.0, 2.0}) {
      for (double z : zs) {
        if (z > 0 && std::pow(z, 1.0 / a) > 700.0) continue;
        const double ref = ml_reference(a, b, z);
        const double got = mittag_leffler(a, b, z);
        INFO("alpha=" << a << " beta=" << b << " z=" << z);
        CHECK(std::abs(got - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST_CASE("mittag_leffler errors") {
  CHECK_THROWS_AS((void)mittag_leffler(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS((void)mittag_leffler(0.5, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS((void)mittag_leffler(0.5, 1.0, 40.0), AccuracyError);
}

TEST_CASE("grid and order invariants") {
  CHECK_THROWS_AS(MemoryOrder(0.0), DomainError);
  CHECK_THROWS_AS(MemoryOrder(1.2), DomainError);
  CHECK(MemoryOrder(0.7).memory_strength() == doctest::Approx(0.3));
  CHECK_THROWS_AS(SolverGrid(0.0, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(SolverGrid(0.0, 1.0, 0.7), DomainError);
  SolverGrid g(0.0, 1.0, 1e-3);
  CHECK(g.n_steps() == 1000);
}

TEST_CASE("history weights") {
  for (double a : {0.3, 0.7, 1.0}) {
    HistoryWeights w(a, 0.01, 400000);
    CHECK(w.rect(0) > 0.0);
    CHECK(std::isfinite(w.rect(0)));
    CHECK(w.trap_first(0) > 0.0);
    for (std::size_t d : {1ul, 7ul, 1000ul, 399999ul}) {
      const long double dl = d;
      const long double al = a;
      const long double ref_b = std::pow(dl + 1, al) - std::pow(dl, al);
      const long double ref_a = std::pow(dl + 1, al + 1) + std::pow(dl - 1, al + 1) - 2 * std::pow(dl, al + 1);
      CHECK(w.rect(d) == doctest::Approx(static_cast<double>(ref_b)).epsilon(1e-7));
      CHECK(w.trap(d) == doctest::Approx(static_cast<double>(ref_a)).epsilon(1e-6));
      const long double ref_first = std::pow(dl, al + 1) - (dl - al) * std::pow(dl + 1, al);
      CHECK(w.trap_first(d) == doctest::Approx(static_cast<double>(ref_first)).epsilon(1e-6));
    }
  }
  HistoryWeights one(1.0, 0.1, 10);
  CHECK(one.trap_first(5) == doctest::Approx(1.0));
  CHECK(one.trap(3) == doctest::Approx(2.0));
  CHECK(one.rect(4) == doctest::Approx(1.0));
}

TEST_CASE("linear relaxation at alpha = 1") {
  SolverGrid g(0.0, 1.0, 1e-3);
  auto tr = solve_caputo(linear_drift, MemoryOrder(1.0), 1.0, g);
  CHECK(tr.x.back() == doctest::Approx(std::exp(-2.0)).epsilon(1e-4));
}

TEST_CASE("fractional relaxation follows the Mittag-Leffler solution") {
  SolverGrid g(0.0, 1.0, 1e-3);
  for (double a : {0.6, 0.8}) {
    auto tr = solve_caputo(linear_drift, MemoryOrder(a), 1.0, g);
    const double ref = mittag_leffler(a, -2.0);
    INFO("alpha=" << a);
    CHECK(std::abs(tr.x.back() - ref) < 1e-4);
  }
}

TEST_CASE("fft history equals direct history") {
  SolverGrid g(0.0, 30.0, 0.01);
  auto drift = [](std::size_t, double x) { return x - x * x * x; };
  SolverOptions direct;
  SolverOptions fft;
  fft.history = HistoryMethod::kFft;
  for (double a : {0.55, 0.8}) {
    auto t1 = solve_caputo(drift, MemoryOrder(a), 0.05, g, direct);
    auto t2 = solve_caputo(drift, MemoryOrder(a), 0.05, g, fft);
    REQUIRE(t1.x.size() == t2.x.size());
    double gap = 0.0;
    for (std::size_t i = 0; i < t1.x.size(); ++i) gap = std::max(gap, std::abs(t1.x[i] - t2.x[i]));
    CHECK(gap < 1e-11);
  }
}

TEST_CASE("fft history equals direct history with noise") {
  SolverGrid g(0.0, 20.0, 0.01);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::vector<double> eta(g.n_steps());
  for (auto& e : eta) e = nd(rng);
  NoiseDrive noise{eta, [](double x) { return 0.2 + 0.1 * x * x; }};
  auto drift = [](std::size_t, double x) { return x - x * x * x; };
  SolverOptions fft;
  fft.history = HistoryMethod::kFft;
  auto a = integrate_volterra(drift, MemoryOrder(0.7), 1.0, g, {}, &noise);
  auto b = integrate_volterra(drift, MemoryOrder(0.7), 1.0, g, fft, &noise);
  double gap = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) gap = std::max(gap, std::abs(a.x[i] - b.x[i]));
  CHECK(gap < 1e-10);
}

TEST_CASE("alpha = 1 agrees with a one-step integrator") {
  SolverGrid g(0.0, 20.0, 0.01);
  auto model = models::RationalModel::herbivory({0.8, 3.0, 0.2, 0.6});
  auto sched = models::ParameterSchedule::pulse("B", 0.6, 0.275, 10.0, 12.0, 0.0, 20.0);
  auto tr = solve_caputo(model, sched, MemoryOrder(1.0), 1.9568, g);
  // RK4 over each smooth segment, restarted at the switch nodes.
  auto vals = sched.sample(g);
  std::vector<double> ref(g.n_steps() + 1);
  ref[0] = 1.9568;
  for (std::size_t n = 0; n < g.n_steps(); ++n) {
    const auto m = model.with_parameter("B", vals[n + 1]);
    auto f = [&](double, double x) { return m.drift(x); };
    SolverGrid one(0.0, 2 * g.h(), g.h());
    ref[n + 1] = rk4(f, ref[n], one)[1];
  }
  double gap = 0.0;
  for (std::size_t n = 0; n < ref.size(); ++n) gap = std::max(gap, std::abs(ref[n] - tr.x[n]));
  CHECK(gap < 5 * g.h());
}

TEST_CASE("equilibrium is a fixpoint for every order") {
  SolverGrid g(0.0, 50.0, 0.01);
  auto model = models::RationalModel::cubic(0.0, 1.0, 0.0, -1.0);
  for (double a : {0.4, 0.8, 1.0}) {
    for (double root : {-1.0, 0.0, 1.0}) {
      auto tr = solve_caputo(model, std::nullopt, MemoryOrder(a), root, g);
      double gap = 0.0;
      for (double v : tr.x) gap = std::max(gap, std::abs(v - root));
      CHECK(gap < 1e-12);
    }
  }
}

TEST_CASE("history dependence for alpha < 1") {
  // Two logistic runs from different pasts; restart the second one from the state
  // the first one reaches at t = 2, then compare futures.
  auto logistic = [](std::size_t, double x) { return x * (1.0 - x); };
  SolverGrid g(0.0, 10.0, 0.01);
  const double a = 0.7;
  auto first = solve_caputo(logistic, MemoryOrder(a), 0.05, g);
  const std::size_t k = 200;
  SolverGrid g2(g.time(k), 10.0, 0.01);
  auto fresh = solve_caputo(logistic, MemoryOrder(a), first.x[k], g2);
  double gap = 0.0;
  for (std::size_t i = 0; i < fresh.x.size(); ++i) gap = std::max(gap, std::abs(fresh.x[i] - first.x[k + i]));
  CHECK(gap > 1e-6 * 10);
  // Memoryless flow has no such gap beyond integration error.
  auto first1 = solve_caputo(logistic, MemoryOrder(1.0), 0.05, g);
  auto fresh1 = solve_caputo(logistic, MemoryOrder(1.0), first1.x[k], g2);
  double gap1 = 0.0;
  for (std::size_t i = 0; i < fresh1.x.size(); ++i) gap1 = std::max(gap1, std::abs(fresh1.x[i] - first1.x[k + i]));
  CHECK(gap1 < 1e-9);
  CHECK(gap > 1000 * gap1);
}

TEST_CASE("trajectory satisfies the discrete Volterra identity") {
  auto drift = [](std::size_t, double x) { return 0.5 * x - x * x * x; };
  SolverGrid g(0.0, 5.0, 0.01);
  const double a = 0.75;
  SolverOptions opt;
  opt.corrector_iters = 6;
  auto tr = solve_caputo(drift, MemoryOrder(a), 0.1, g, opt);
  HistoryWeights w(a, g.h(), g.n_steps());
  double worst = 0.0;
  for (std::size_t m = 1; m <= g.n_steps(); m += 37) {
    double s = w.trap_first(m - 1) * drift(0, tr.x[0]);
    for (std::size_t j = 1; j < m; ++j) s += w.trap(m - j) * drift(j, tr.x[j]);
    s += drift(m, tr.x[m]);
    worst = std::max(worst, std::abs(tr.x[0] + w.corrector_scale() * s - tr.x[m]));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("divergence reports last valid node") {
  auto blowup = [](std::size_t, double x) { return x * x; };
  SolverGrid g(0.0, 5.0, 0.01);
  SolverOptions opt;
  opt.upper_bound = 100.0;
  try {
    (void)solve_caputo(blowup, MemoryOrder(1.0), 1.0, g, opt);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.last_valid_index() > 90);
    CHECK(e.last_valid_index() < 100);
  }
  auto sink = models::RationalModel::cubic(-1.0, 0.0, 0.0, 0.0);
  SolverOptions box;
  box.lower_bound = 0.0;
  CHECK_THROWS_AS((void)solve_caputo(sink, std::nullopt, MemoryOrder(0.9), 0.5, SolverGrid(0, 100, 0.01), box),
                  DivergenceError);
}

TEST_CASE("zero noise reproduces the deterministic solve") {
  SolverGrid g(0.0, 10.0, 0.01);
  std::vector<double> eta(g.n_steps(), 1.0);
  NoiseDrive noise{eta, [](double) { return 0.0; }};
  auto drift = [](std::size_t, double x) { return x - x * x * x; };
  for (double a : {0.7, 1.0}) {
    auto det = integrate_volterra(drift, MemoryOrder(a), 0.3, g);
    auto sto = integrate_volterra(drift, MemoryOrder(a), 0.3, g, {}, &noise);
    CHECK(det.x == sto.x);
  }
}

TEST_CASE("stop rule truncates") {
  SolverGrid g(0.0, 10.0, 0.01);
  StopRule stop = [](std::size_t, double x) { return x > 0.5; };
  auto res = integrate_volterra([](std::size_t, double x) { return x * (1 - x); }, MemoryOrder(0.8), 0.05, g,
                                {}, nullptr, stop);
  CHECK(res.stopped_early);
  CHECK(res.x.back() > 0.5);
  CHECK(res.x[res.x.size() - 2] <= 0.5);
}
