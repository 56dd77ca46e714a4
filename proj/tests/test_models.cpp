#include <doctest.h>

#include <cmath>
#include <numeric>

#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/multi_taub_nut.hpp"
#include "collapselab/models/schwarzschild.hpp"
#include "collapselab/models/taub_nut.hpp"
#include "collapselab/rng.hpp"

using namespace collapselab;

namespace {
constexpr double kPi = 3.14159265358979323846;

// independent oracle: the deck-motion distance |rho^k(p) - p|
double deck_motion_length(const Angle& theta, long long k, double t) {
  Vec p{t, 0.0, 0.0};
  return norm(screw_apply(theta, k, p) - p);
}
}  // namespace

TEST_CASE("screw_apply basics") {
  Angle third = Angle::of_rational(1, 3);
  Vec p{5, 0, 0};
  Vec q = screw_apply(third, 3, p);
  CHECK(q[0] == doctest::Approx(5.0));
  CHECK(q[1] == doctest::Approx(0.0));
  CHECK(q[2] == doctest::Approx(3.0));

  Angle half = Angle::of_rational(1, 2);  // theta = pi
  Vec r = screw_apply(half, 1, Vec{2, 0, 0});
  CHECK(r[0] == doctest::Approx(-2.0));
  CHECK(r[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r[2] == doctest::Approx(1.0));

  Vec s = screw_apply(Angle(1.234), 0, Vec{1, 2, 3});
  CHECK(norm(s - Vec{1, 2, 3}) == 0.0);

  // composition law, exact on the rational branch
  Angle a = Angle::of_rational(3, 7);
  Vec x{1.5, -0.25, 0.75};
  Vec lhs = screw_apply(a, 4, screw_apply(a, 9, x));
  Vec rhs = screw_apply(a, 13, x);
  CHECK(norm(lhs - rhs) < 1e-12);
}

TEST_CASE("loop_length closed form against the deck-motion oracle") {
  Angle third = Angle::of_rational(1, 3);
  // l_3(t) = 3 for every t at theta = 2pi/3
  for (double t : {0.0, 1.0, 7.0, 153.0}) CHECK(loop_length(third, 3, t) == 3.0);
  CHECK(loop_length(Angle(2.1), 1, 0.0) == doctest::Approx(1.0));
  CHECK(loop_length(Angle(kPi), 1, 2.0) == doctest::Approx(std::sqrt(17.0)));

  Rng rng(20260808);
  for (int i = 0; i < 10000; ++i) {
    Angle theta(rng.uniform(0, 2 * kPi));
    long long k = 1 + (long long)(rng.uniform() * 40);
    double t = rng.uniform(0, 50);
    double a = loop_length(theta, k, t);
    double b = deck_motion_length(theta, k, t);
    CHECK(std::fabs(a - b) <= 1e-12 * std::max(1.0, b));
  }
}

TEST_CASE("flat_inj plateaus exactly at q/2 for rational holonomy") {
  for (long long q = 1; q <= 12; ++q)
    for (long long p = 1; p <= q; ++p) {
      if (std::gcd(p, q) != 1ll) continue;
      Angle theta = Angle::of_rational(p, q);
      double t_min = double(q) / std::sin(kPi / double(q));
      for (double t : {t_min, 2 * t_min, 10 * t_min})
        CHECK(flat_inj(theta, t) == double(q) / 2.0);
    }
  // trivial holonomy: inj = 1/2 everywhere
  for (double t : {0.0, 3.0, 1e4}) CHECK(flat_inj(Angle::of_rational(0, 1), t) == 0.5);
}

TEST_CASE("flat_inj sqrt(t) upper bound and Roth-type lower growth") {
  const double c_up = std::sqrt(1 + 4 * kPi * kPi) / 2;
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Angle theta(rng.uniform(0, 2 * kPi));
    double t = rng.uniform(1.0, 1e4);
    CHECK(flat_inj(theta, t) <= c_up * std::sqrt(t) * (1 + 1e-12));
  }
  // theta = 2 pi (sqrt(2)-1): fitted growth exponent in (0, 0.5]
  Angle alg(2 * kPi * (std::sqrt(2.0) - 1.0));
  int n = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double t = 1e2; t <= 1e6; t *= 1.6) {
    double x = std::log(t), y = std::log(flat_inj(alg, t));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope > 0.0);
  CHECK(slope <= 0.5 + 1e-6);
}

TEST_CASE("flat_inj explicit k_max guard") {
  Angle theta(2 * kPi * 0.2137);
  CHECK_THROWS_AS(flat_inj(theta, 1e4, 3), KMaxTooSmall);
  CHECK(flat_inj(theta, 1e4) > 0);
}

TEST_CASE("deck_distance enumeration oracle") {
  Angle fifth = Angle::of_rational(1, 5);
  FlatScrewQuotient model(fifth);
  ChartPoint x(ChartId::cartesian, Vec{3, 1, 0.5});
  CHECK(deck_distance(model, x, x) == 0.0);

  // points on the soul at parameter distance 0.4: distance 0.4 for any theta
  ChartPoint a(ChartId::cartesian, Vec{0, 0, 0.1}), b(ChartId::cartesian, Vec{0, 0, 0.5});
  CHECK(deck_distance(model, a, b) == doctest::Approx(0.4));

  // y = rho^3(x) is the same quotient point as x: the loop l_3 of length 3 is
  // realized by the k = 0 lift while the quotient distance itself is zero
  Angle third = Angle::of_rational(1, 3);
  FlatScrewQuotient m3(third);
  ChartPoint p(ChartId::cartesian, Vec{10, 0, 0});
  ChartPoint q(ChartId::cartesian, screw_apply(third, 3, p.coords));
  CHECK(norm(q.coords - p.coords) == doctest::Approx(loop_length(third, 3, 10.0)));
  CHECK(deck_distance(m3, p, q) == 0.0);

  CHECK_THROWS_AS(deck_distance(m3, p, q, 3), WindowTooSmall);
  // a generic nearby point: quotient distance equals the shortest lift
  ChartPoint y2(ChartId::cartesian, Vec{10.5, 0.2, 0.3});
  double direct = norm(y2.coords - p.coords);
  CHECK(deck_distance(m3, p, y2) == doctest::Approx(direct));
}

TEST_CASE("taub_nut_profile solves the radial ODE") {
  auto prof = taub_nut_profile(1200.0, 1e-12);
  CHECK(prof->H(0.0) == 0.0);
  for (double t : {1e-3, 5e-3, 2e-2})
    CHECK(prof->H(t) / (t * t / 2) == doctest::Approx(1.0).epsilon(1e-3));
  double Hp = prof->dH(1000.0);
  CHECK(Hp >= 0.999);
  CHECK(Hp <= 1.0);
  // the ODE-built grid nodes against the separable closed form t(H)
  auto rows = prof->grid_rows();
  for (std::size_t i = 7; i < rows.size(); i += rows.size() / 9) {
    double t_back = TaubNutProfile::t_of_H(rows[i][1]);
    CHECK(t_back == doctest::Approx(rows[i][0]).epsilon(1e-9));
  }
  // between nodes the raw spline is a seed (1e-4-level); the polished H is exact
  for (double t : {0.5, 3.0, 17.0, 200.0, 900.0}) {
    CHECK(TaubNutProfile::t_of_H(prof->H_grid(t)) == doctest::Approx(t).epsilon(2e-4));
    CHECK(TaubNutProfile::t_of_H(prof->H(t)) == doctest::Approx(t).epsilon(1e-12));
  }
  double prev = -1;
  for (double t = 0.5; t < 1200; t += 13.7) {
    double h = prof->H(t);
    CHECK(h > prev);
    prev = h;
  }
}

TEST_CASE("taub-nut chart transitions are mutually inverse") {
  TaubNut tn(256.0, 1e-12);
  ChartPoint p(ChartId::bianchi, Vec{13.0, 1.1, 0.7, 2.3});
  auto q = tn.to_chart(p, ChartId::monopole);
  REQUIRE(q.has_value());
  auto back = tn.to_chart(*q, ChartId::bianchi);
  REQUIRE(back.has_value());
  for (int i = 0; i < 4; ++i)
    CHECK(back->coords[i] == doctest::Approx(p.coords[i]).epsilon(1e-10));
  CHECK(q->coords[3] == doctest::Approx(0.5 * (p.coords[3] + p.coords[2])));
}

TEST_CASE("taub-nut singular points are rejected") {
  TaubNut tn(64.0, 1e-11);
  CHECK_THROWS_AS(tn.check_point(ChartPoint(ChartId::bianchi, Vec{1e-10, 1.0, 0, 0})),
                  SingularPoint);
  CHECK_THROWS_AS(tn.check_point(ChartPoint(ChartId::monopole, Vec{0, 0, -5, 0})),
                  SingularPoint);  // on the Dirac string
  CHECK_NOTHROW(tn.check_point(ChartPoint(ChartId::monopole, Vec{0, 0, 5, 0})));
}

TEST_CASE("multi-taub-nut potential and strings") {
  MultiTaubNut m({Vec{0, 0, 1}, Vec{0, 0, -1}});
  CHECK(m.potential(Vec{0, 0, 0}) == doctest::Approx(2.0));
  // origin must be inside the chart (strings point away from the centroid)
  CHECK_NOTHROW(m.check_point(ChartPoint(ChartId::monopole, Vec{0, 0, 0, 0})));
  CHECK_THROWS_AS(m.check_point(ChartPoint(ChartId::monopole, Vec{0, 0, 3, 0})), SingularPoint);
  CHECK_THROWS_AS(m.check_point(ChartPoint(ChartId::monopole, Vec{0, 0, -3, 0})), SingularPoint);
  CHECK_THROWS_AS(m.check_point(ChartPoint(ChartId::monopole, Vec{0, 0, 1 + 1e-12, 0})),
                  SingularPoint);
}

TEST_CASE("model factory parses the schema") {
  auto m1 = model_from_json(R"({"type":"euclidean"})");
  CHECK(m1->name() == "euclidean");
  auto m2 = model_from_json(R"({"type":"flat_screw","theta_rational":[1,3]})");
  CHECK(m2->name() == "flat_screw");
  auto m3 = model_from_json(R"({"type":"multi_taub_nut","nuts":[[0,0,1],[0,0,-1]]})");
  CHECK(m3->name() == "multi_taub_nut");
  auto m4 = model_from_json(R"({"type":"schwarzschild","mass":1.0})");
  CHECK(m4->name() == "schwarzschild");
  CHECK_THROWS_AS(model_from_json(R"({"type":"nope"})"), ConfigError);
  CHECK_THROWS_AS(model_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(model_from_json(R"({"type":"flat_screw"})"), ConfigError);
}

TEST_CASE("liouville-type angle: inj(t)/t^0.05 admits a long decreasing run") {
  // theta/2pi = sum_{n<=6} 10^{-n!}; terms beyond n = 3 are below one ulp
  double frac = 0;
  for (int n = 1; n <= 6; ++n) frac += std::pow(10.0, -std::tgamma(double(n + 1)));
  Angle theta(2 * kPi * frac);
  int best_run = 0, run = 0;
  double prev = 1e300;
  for (double t = 10; t <= 1e6; t *= 1.25) {
    double v = flat_inj(theta, t) / std::pow(t, 0.05);
    if (v < prev - 1e-12) {
      ++run;
      best_run = std::max(best_run, run);
    } else {
      run = 0;
    }
    prev = v;
  }
  CHECK(best_run >= 4);
}
