#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fracland/fitting/fitting.hpp"
#include "fracland/models/equilibria.hpp"
#include "json.hpp"

using namespace fracland;
using namespace fracland::fitting;

namespace {

const models::HerbivoryParams kTruth{0.8, 6.0, 0.2, 0.0};

std::vector<double> grazing_values() {
  std::vector<double> b;
  for (int i = 2; i <= 12; ++i) b.push_back(i / 10.0);
  return b;
}

/// Upper fold from the sign of the discriminant of r (1 - x/K)(A + x) - B, scanned in steps of 1e-3.
double discriminant_scan_fold(double r, double K, double A) {
  auto disc = [&](double B) {
    const double a = -r / K, b = r * (1.0 - A / K), c = r * A - B;
    return b * b - 4.0 * a * c;
  };
  double B = 0.0;
  while (disc(B + 1e-3) > 0.0) B += 1e-3;
  return B + 0.5e-3;
}

const FitDataset& memory_dataset() {
  static const auto ds = generate_dataset(kTruth, fde::MemoryOrder(0.8), grazing_values());
  return ds;
}

const FitResult& memory_fit() {
  static const auto f = fit_memory_free(memory_dataset());
  return f;
}

}  // namespace

TEST_CASE("herbivory bistable window") {
  const auto w = herbivory_window(0.8, 6.0, 0.2);
  CHECK(w.lower == doctest::Approx(0.16));
  CHECK(w.upper == doctest::Approx(0.8 * 6.2 * 6.2 / 24.0));
  for (double B : {0.17, 0.6, 1.2, 1.28}) {
    auto p = kTruth;
    p.B = B;
    const auto eq = models::equilibria(models::RationalModel::herbivory(p));
    CHECK(eq.bistable());
    CHECK(eq.lower_stable() == doctest::Approx(0.0));
  }
  CHECK_FALSE(w.contains(1.3));
  CHECK_FALSE(herbivory_window(1.0, 0.1, 0.2).contains(0.1));
}

TEST_CASE("memory-free integrator matches the logistic solution") {
  const double r = 0.8, K = 6.0, x0 = 0.3;
  std::vector<double> t;
  for (int k = 1; k <= 50; ++k) t.push_back(0.4 * k);
  const auto x = integrate_memory_free(r, K, 0.2, {{20.0, 0.0}}, x0, 0.0, t);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double exact = K / (1.0 + (K / x0 - 1.0) * std::exp(-r * t[k]));
    CHECK(x[k] == doctest::Approx(exact).epsilon(1e-8));
  }
  SUBCASE("splitting a constant B into segments changes nothing") {
    const auto y = integrate_memory_free(r, K, 0.2, {{3.3, 0.5}, {11.0, 0.5}, {20.0, 0.5}}, 2.0, 0.0, t);
    const auto z = integrate_memory_free(r, K, 0.2, {{20.0, 0.5}}, 2.0, 0.0, t);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(y[k] == doctest::Approx(z[k]).epsilon(1e-8));
  }
  CHECK_THROWS_AS((void)integrate_memory_free(r, K, 0.2, {{5.0, 0.5}}, 2.0, 0.0, t), DomainError);
}

TEST_CASE("dataset runs start either side of the saddle and settle") {
  const auto& ds = memory_dataset();
  CHECK(ds.alpha == 0.8);
  REQUIRE(ds.runs.size() == 22);
  CHECK(ds.n_points() == 22 * 200);
  for (std::size_t i = 0; i < ds.runs.size(); i += 2) {
    const auto& lo = ds.runs[i];
    const auto& hi = ds.runs[i + 1];
    auto p = kTruth;
    p.B = lo.B;
    const auto eq = models::equilibria(models::RationalModel::herbivory(p));
    CHECK(lo.x0 < eq.unstable());
    CHECK(hi.x0 > eq.unstable());
    const double span = eq.upper_stable() - eq.lower_stable();
    // power-law approach under memory: still closing in at the end
    for (const auto* run : {&lo, &hi}) {
      const double root = run == &lo ? eq.lower_stable() : eq.upper_stable();
      const double mid = std::abs(run->x[run->x.size() / 2] - root);
      const double end = std::abs(run->x.back() - root);
      CHECK(end < mid);
      CHECK(end < 0.05 * span);
    }
    CHECK(lo.t.front() == doctest::Approx(0.5));
    CHECK(lo.t.back() == doctest::Approx(100.0));
  }
  CHECK_THROWS_AS((void)generate_dataset(kTruth, fde::MemoryOrder(0.8), {0.1}), ConfigError);
  CHECK_THROWS_AS((void)generate_dataset(kTruth, fde::MemoryOrder(0.8), {1.3}), ConfigError);
}

TEST_CASE("memory-free self-fit recovers the generator") {
  const auto bs = grazing_values();
  const auto ds = generate_dataset(kTruth, fde::MemoryOrder(1.0), bs);
  FitGuess g{0.84, 5.7, 0.21, {}};
  for (double b : bs) g.B.push_back(1.03 * b);
  const auto f = fit_memory_free(ds, g);
  CHECK(f.r == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(f.K == doctest::Approx(6.0).epsilon(1e-4));
  CHECK(f.A == doctest::Approx(0.2).epsilon(1e-4));
  for (std::size_t j = 0; j < bs.size(); ++j) CHECK(std::abs(f.B[j] - bs[j]) < 1e-4);
  REQUIRE(f.run_b.size() == ds.runs.size());
  for (std::size_t i = 0; i < ds.runs.size(); ++i) CHECK(std::abs(f.B[f.run_b[i]] - ds.runs[i].B) < 1e-4);
  CHECK(f.rmse < 1e-7);
  CHECK(f.bistable);
}

TEST_CASE("fitting memory data displaces the bifurcation structure") {
  const auto& f = memory_fit();
  CHECK(std::isfinite(f.residual_norm));
  CHECK(f.residual_norm <= f.initial_residual_norm);
  CHECK(f.r >= f.bounds.r_lo);
  CHECK(f.r <= f.bounds.r_hi);
  CHECK(f.K >= f.bounds.K_lo);
  CHECK(f.K <= f.bounds.K_hi);
  CHECK(f.A >= f.bounds.A_lo);
  CHECK(f.A <= f.bounds.A_hi);
  CHECK(f.bistable);
  // reference fit: r = 0.5726, K = 5.8242, A = 0.1112
  CHECK(f.r == doctest::Approx(0.5726).epsilon(0.1));
  CHECK(f.K == doctest::Approx(5.8242).epsilon(0.1));
  CHECK(f.A == doctest::Approx(0.1112).epsilon(0.1));
  // fitted grazing values shrink and stay ordered
  for (std::size_t j = 0; j < f.B.size(); ++j) {
    CHECK(f.B[j] < grazing_values()[j]);
    if (j > 0) CHECK(f.B[j] > f.B[j - 1]);
  }
  const auto c = compare_bifurcations(kTruth, 0.8, {f.r, f.K, f.A, 0.0});
  REQUIRE(c.truth.upper);
  REQUIRE(c.fitted.upper);
  CHECK(*c.fitted.upper < *c.truth.upper);
  CHECK(*c.fitted.upper == doctest::Approx(0.8).epsilon(0.15 / 0.8));
  CHECK(c.shrunk);
  CHECK_FALSE(c.structural_mismatch);
}

TEST_CASE("fold locations agree with a discriminant scan") {
  for (const auto& p : {kTruth, models::HerbivoryParams{0.5726, 5.8242, 0.1112, 0.0},
                        models::HerbivoryParams{1.3, 3.0, 0.4, 0.0}}) {
    const auto c = compare_bifurcations(p, 1.0, p);
    REQUIRE(c.truth.upper);
    REQUIRE(c.truth.lower);
    CHECK(std::abs(*c.truth.upper - discriminant_scan_fold(p.r, p.K, p.A)) <= 1e-3);
    CHECK(*c.truth.upper == doctest::Approx(p.r * (p.K + p.A) * (p.K + p.A) / (4.0 * p.K)).epsilon(1e-6));
    CHECK(*c.truth.lower == doctest::Approx(p.r * p.A).epsilon(1e-6));
    CHECK(*c.upper_shift == 0.0);
    CHECK(*c.truth.interval() == *c.fitted.interval());
    CHECK_FALSE(c.shrunk);
  }
  SUBCASE("a fold outside the sweep range is a structural mismatch") {
    const auto c = compare_bifurcations(kTruth, 0.8, kTruth, 0.0, 1.0, 201);
    CHECK(c.structural_mismatch);
    CHECK_FALSE(c.upper_shift);
  }
}

TEST_CASE("fit rejects bad starts") {
  const auto& ds = memory_dataset();
  CHECK_THROWS_AS((void)fit_memory_free(ds, FitGuess{20.0, 6.0, 0.2, {}}), FitError);
  CHECK_THROWS_AS((void)fit_memory_free(ds, FitGuess{0.8, 6.0, 0.2, {0.3}}), ConfigError);
  FitDataset empty;
  CHECK_THROWS_AS((void)fit_memory_free(empty), ConfigError);
}

TEST_CASE("two-pulse inference underestimates the true offsets") {
  const auto r = two_pulse_inference(kTruth, fde::MemoryOrder(0.8), memory_dataset(), memory_fit());
  CHECK(r.inferred1 > 0.0);
  CHECK(r.inferred1 < 1.0);
  CHECK(r.inferred2 > r.inferred1);
  CHECK(r.inferred2 < 1.5);
  CHECK(std::isfinite(r.rmse));
  CHECK(r.fitted_x.size() == r.data.x.size());

  SUBCASE("no bias without memory") {
    const auto bs = grazing_values();
    const auto ds = generate_dataset(kTruth, fde::MemoryOrder(1.0), bs);
    FitResult exact;
    exact.r = kTruth.r;
    exact.K = kTruth.K;
    exact.A = kTruth.A;
    exact.B = bs;
    const auto m = two_pulse_inference(kTruth, fde::MemoryOrder(1.0), ds, exact);
    CHECK(m.inferred1 == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(m.inferred2 == doctest::Approx(1.5).epsilon(1e-5));
  }
}

TEST_CASE("fit outputs serialize") {
  const auto dir = std::filesystem::temp_directory_path() / "fracland_fit_test";
  std::filesystem::create_directories(dir);
  const auto& f = memory_fit();
  const auto c = compare_bifurcations(kTruth, 0.8, {f.r, f.K, f.A, 0.0});
  write_fit_json(f, c, (dir / "fit.json").string());
  std::ifstream in(dir / "fit.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["fit"]["r"].get<double>() == f.r);
  CHECK(j["fit"]["B"].size() == 11);
  CHECK(j["bifurcation"]["shrunk"].get<bool>());
  write_dataset_csv(memory_dataset(), (dir / "data.csv").string());
  std::ifstream csv(dir / "data.csv");
  std::size_t lines = 0;
  for (std::string s; std::getline(csv, s);) ++lines;
  CHECK(lines == 4 + 1 + 22 * 200);
  std::filesystem::remove_all(dir);
}
