#include <doctest.h>

#include <cmath>

#include "collapselab/asymptotics.hpp"
#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/taub_nut.hpp"
#include "collapselab/parallel.hpp"

using namespace collapselab;

namespace {
constexpr double kPi = 3.14159265358979323846;

// exact Taub-NUT ball volume around the nut: 8 pi^2 (R^3/3 + R^2/4), R = H(t)
double tn_ball_volume_exact(const TaubNut& tn, double t) {
  double R = tn.profile().H(t);
  return 8 * kPi * kPi * (R * R * R / 3 + R * R / 4);
}
}  // namespace

TEST_CASE("decay_fit recovers exact power laws") {
  std::vector<std::pair<double, double>> pts;
  for (double t = 2; t <= 300; t *= 1.7) pts.push_back({t, 5.0 * std::pow(t, -3.0)});
  DecayFit fit = decay_fit(pts, 1.0, 1000.0);
  CHECK(fit.exponent == doctest::Approx(-3.0).epsilon(1e-10));
  CHECK(fit.residual <= 1e-10);
  CHECK(fit.n_points >= 5);

  std::vector<std::pair<double, double>> cpts;
  for (double t = 2; t <= 300; t *= 1.7) cpts.push_back({t, 4.2});
  CHECK(decay_fit(cpts, 1.0, 1000.0).exponent == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(decay_fit(pts, 500.0, 600.0), EmptyWindow);
  std::vector<std::pair<double, double>> bad = {{1, 1}, {2, -1}, {3, 1}, {4, 1}, {5, 1}};
  CHECK_THROWS_AS(decay_fit(bad, 0.5, 10.0), NonPositiveValue);
}

TEST_CASE("euclidean ball volume by monte carlo") {
  Euclidean euc;
  ChartPoint o(ChartId::cartesian, Vec{0, 0, 0});
  VolumeEstimate est = ball_volume(euc, o, 2.0, VolumeMethod::monte_carlo, 1 << 20, 99);
  double expect = 4.0 / 3.0 * kPi * 8;
  CHECK(std::fabs(est.value - expect) <= 0.01 * expect);
  CHECK(est.std_error > 0);
  CHECK(ball_volume(euc, o, 2.0, VolumeMethod::product_quadrature, 0, 0).value ==
        doctest::Approx(expect));
}

TEST_CASE("monte carlo volumes are deterministic across thread counts") {
  Euclidean euc;
  ChartPoint o(ChartId::cartesian, Vec{0, 0, 0});
  int saved = worker_threads();
  worker_threads() = 1;
  VolumeEstimate a = ball_volume(euc, o, 1.5, VolumeMethod::monte_carlo, 1 << 16, 1234);
  worker_threads() = 4;
  VolumeEstimate b = ball_volume(euc, o, 1.5, VolumeMethod::monte_carlo, 1 << 16, 1234);
  worker_threads() = saved;
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("flat quotient volume growth is planar") {
  FlatScrewQuotient screw(Angle::of_rational(1, 3));
  ChartPoint x(ChartId::cartesian, Vec{40, 0, 0});
  double mn = 1e300, mx = 0;
  for (double t : {2.0, 4.0, 7.0, 10.0}) {
    VolumeEstimate est = ball_volume(screw, x, t, VolumeMethod::monte_carlo, 1 << 17, 7);
    double ratio = est.value / (t * t);
    mn = std::min(mn, ratio);
    mx = std::max(mx, ratio);
  }
  CHECK(mx / mn <= 4.0);
  // volume self-improvement: fitted growth exponent is 2.0 +- 0.1 once the
  // window sits above the collapse scale (smallest decade excluded)
  ChartPoint far(ChartId::cartesian, Vec{160, 0, 0});
  std::vector<std::pair<double, double>> pts;
  for (double t = 6.0; t <= 40.5; t *= 1.3)
    pts.push_back({t, ball_volume(screw, far, t, VolumeMethod::monte_carlo, 1 << 18, 11).value});
  DecayFit fit = decay_fit(pts, 5.0, 50.0);
  CHECK(std::fabs(fit.exponent - 2.0) <= 0.1);
}

TEST_CASE("taub-nut ball volume matches the closed form and grows cubically") {
  TaubNut tn(512.0, 1e-12);
  ChartPoint o = tn.distinguished_point();
  double mn = 1e300, mx = 0;
  for (double t : {10.0, 30.0, 100.0}) {
    VolumeEstimate est = ball_volume(tn, o, t, VolumeMethod::monte_carlo, 1 << 16, 5);
    double exact = tn_ball_volume_exact(tn, t);
    CHECK(std::fabs(est.value - exact) <= 4 * est.std_error + 1e-9 * exact);
    // the quadrature route agrees with the closed form much more tightly
    VolumeEstimate quad = ball_volume(tn, o, t, VolumeMethod::product_quadrature, 0, 0);
    CHECK(quad.value == doctest::Approx(exact).epsilon(1e-8));
    double ratio = est.value / (t * t * t);
    mn = std::min(mn, ratio);
    mx = std::max(mx, ratio);
  }
  CHECK(mx / mn <= 3.0);
}

TEST_CASE("weighted curvature integral behaves like the power count") {
  Euclidean euc;
  CHECK(weighted_curvature_integral(euc, 10, 80, 1 << 12, 3).value == 0.0);
  FlatScrewQuotient screw(Angle::of_rational(1, 4));
  CHECK(weighted_curvature_integral(screw, 10, 80, 1 << 12, 3).value == 0.0);

  TaubNut tn(512.0, 1e-12);
  // integrand ~ r^{-6} * r * r^2: annulus increments shrink by >= 2 per doubling
  double i1 = weighted_curvature_integral(tn, 10, 20, 1 << 13, 17).value;
  double i2 = weighted_curvature_integral(tn, 20, 40, 1 << 13, 18).value;
  double i3 = weighted_curvature_integral(tn, 40, 80, 1 << 13, 19).value;
  CHECK(i1 > 0);
  CHECK(i2 <= i1 / 2);
  CHECK(i3 <= i2 / 2);
}

TEST_CASE("inj profile across the zoo") {
  Euclidean euc;
  std::vector<ChartPoint> pts{ChartPoint(ChartId::cartesian, Vec{1, 0, 0})};
  auto prof = inj_profile(euc, pts, 5.0);
  REQUIRE(prof.size() == 1);
  CHECK(prof[0].infinite);
  CHECK(std::isinf(prof[0].inj));

  FlatScrewQuotient screw(Angle::of_rational(1, 3));
  std::vector<ChartPoint> fpts;
  for (double t : {10.0, 30.0, 100.0}) fpts.push_back(ChartPoint(ChartId::cartesian, Vec{t, 0, 0}));
  for (const InjSample& s : inj_profile(screw, fpts, 10.0)) {
    CHECK(s.inj == 1.5);
    CHECK(!s.infinite);
  }
}

TEST_CASE("inj is half the shortest loop across modules") {
  // definitional consistency: 2 inj(x) <= length of every loop found at x
  FlatScrewQuotient screw(Angle::of_rational(2, 5));
  for (double t : {4.0, 9.0, 20.0}) {
    ChartPoint x(ChartId::cartesian, Vec{t, 0, 0});
    double inj = flat_inj(screw.theta(), t);
    for (const auto& loop : geodesic_loops(screw, x, 5 * inj + 3))
      CHECK(2 * inj <= loop.length * (1 + 1e-12));
  }
}

TEST_CASE("continued fractions") {
  ContinuedFraction athird = continued_fraction_of(1.0 / 3.0, 10);
  REQUIRE(athird.coefficients.size() == 2);
  CHECK(athird.coefficients[0] == 0);
  CHECK(athird.coefficients[1] == 3);

  ContinuedFraction sq = continued_fraction_of(std::sqrt(2.0) - 1, 15);
  for (std::size_t i = 1; i < sq.coefficients.size(); ++i) CHECK(sq.coefficients[i] == 2);

  ContinuedFraction gold = continued_fraction_of((std::sqrt(5.0) - 1) / 2, 15);
  for (std::size_t i = 1; i < gold.coefficients.size(); ++i) CHECK(gold.coefficients[i] == 1);

  // convergent recurrence p_i = a_i p_{i-1} + p_{i-2} in exact integers
  const auto& a = sq.coefficients;
  const auto& c = sq.convergents;
  for (std::size_t i = 2; i < c.size(); ++i) {
    CHECK(c[i].first == a[i] * c[i - 1].first + c[i - 2].first);
    CHECK(c[i].second == a[i] * c[i - 1].second + c[i - 2].second);
  }
  // quality |x - p/q| <= 1/(q q')
  double x = std::sqrt(2.0) - 1;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    double err = std::fabs(x - double(c[i].first) / double(c[i].second));
    CHECK(err <= 1.0 / (double(c[i].second) * double(c[i + 1].second)) + 1e-15);
  }
}

TEST_CASE("pigeonhole angle selection") {
  long long k = pigeonhole_k(2 * kPi / 3, 9.0);
  CHECK(k == 3);  // |e^{3 i theta} - 1| = 0
  double theta = 2 * kPi * (std::sqrt(2.0) - 1);
  long long k2 = pigeonhole_k(theta, 100.0);
  CHECK(k2 >= 1);
  CHECK(k2 <= 10);
  CHECK(2 * std::fabs(std::sin(0.5 * double(k2) * theta)) <= 2 * kPi / 10.0);
  CHECK(pigeonhole_k(1.234, 1.0) == 1);
}
