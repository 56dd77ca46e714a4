#ifndef COLLAPSELAB_MODELS_FLAT_FAMILY_HPP
#define COLLAPSELAB_MODELS_FLAT_FAMILY_HPP

// The flat members of the model zoo: Euclidean R^3, the flat screw quotients
// of R^3 (plane bundles over the circle), and the trivial product R^3 x S^1.

#include <cmath>
#include <optional>
#include <utility>

#include "collapselab/model.hpp"

namespace collapselab {

// Screw angle: a real value plus an optional exact rational tag theta = 2*pi*p/q,
// which enables exact branch logic (sin(k*theta/2) == 0 exactly when q | k*p).
struct Angle {
  double radians = 0.0;
  std::optional<std::pair<long long, long long>> rational;  // (p, q), coprime

  Angle() = default;
  explicit Angle(double r) : radians(r) {}
  static Angle of_rational(long long p, long long q);
  bool is_rational() const { return rational.has_value(); }
};

// sin(k*theta/2), exact on the rational branch.
double sin_k_half(const Angle& theta, long long k);

// Screw motion rho^k: rotation by k*theta about the z-axis composed with
// translation by k along it (pitch 1).
Vec screw_apply(const Angle& theta, long long k, const Vec& p);
Mat screw_rotation(const Angle& theta, long long k);

// Length of the geodesic loop [x, rho^k(x)] at distance t from the axis.
double loop_length(const Angle& theta, long long k, double t);

// Injectivity radius at distance t from the soul: (1/2) inf_k l_k(t).
double flat_inj(const Angle& theta, double t, long long k_max);
double flat_inj(const Angle& theta, double t);  // automatic k_max policy

struct ScrewDeck final : DeckAction {
  Angle theta;
  explicit ScrewDeck(Angle th) : theta(th) {}
  int dim() const override { return 3; }
  Vec apply(long k, const Vec& x) const override { return screw_apply(theta, k, x); }
  Mat differential(long k) const override { return screw_rotation(theta, k); }
};

class FlatScrewQuotient final : public ModelBase<FlatScrewQuotient> {
public:
  explicit FlatScrewQuotient(Angle theta) : theta_(theta), deck_(theta) {}

  const Angle& theta() const { return theta_; }

  int dim() const override { return 3; }
  std::string name() const override { return "flat_screw"; }
  ChartId primary_chart() const override { return ChartId::cartesian; }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId, const std::array<S, 4>&) const {
    TMat<S> g(3);
    for (int i = 0; i < 3; ++i) g(i, i) = S(1.0);
    return g;
  }

  Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const override;
  Mat closure_correction(ChartId chart, const Vec& end, const Vec& base) const override;
  ChartPoint distinguished_point() const override {
    return ChartPoint(ChartId::cartesian, Vec{0, 0, 0});
  }
  double distance_to_o(const ChartPoint& p) const override {
    return quotient_distance(p, distinguished_point());
  }
  bool has_exact_quotient_distance() const override { return true; }
  double quotient_distance(const ChartPoint& a, const ChartPoint& b) const override;
  const DeckAction* deck() const override { return &deck_; }

private:
  Angle theta_;
  ScrewDeck deck_;
};

// Exact quotient distance by deck enumeration over |k| <= k_window.
double deck_distance(const FlatScrewQuotient& model, const ChartPoint& x, const ChartPoint& y,
                     long k_window);
double deck_distance(const FlatScrewQuotient& model, const ChartPoint& x, const ChartPoint& y);

class Euclidean final : public ModelBase<Euclidean> {
public:
  int dim() const override { return 3; }
  std::string name() const override { return "euclidean"; }
  ChartId primary_chart() const override { return ChartId::cartesian; }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId, const std::array<S, 4>&) const {
    TMat<S> g(3);
    for (int i = 0; i < 3; ++i) g(i, i) = S(1.0);
    return g;
  }

  ChartPoint distinguished_point() const override {
    return ChartPoint(ChartId::cartesian, Vec{0, 0, 0});
  }
  double distance_to_o(const ChartPoint& p) const override { return norm(p.coords); }
  bool has_exact_quotient_distance() const override { return true; }
  double quotient_distance(const ChartPoint& a, const ChartPoint& b) const override {
    return norm(a.coords - b.coords);
  }
};

struct TranslationDeck final : DeckAction {
  double step;
  explicit TranslationDeck(double s) : step(s) {}
  int dim() const override { return 4; }
  Vec apply(long k, const Vec& x) const override {
    Vec r = x;
    r[3] += double(k) * step;
    return r;
  }
  Mat differential(long) const override { return Mat::identity(4); }
};

// R^3 x S^1 with circle circumference L: the trivial product test model.
class EuclideanS1 final : public ModelBase<EuclideanS1> {
public:
  explicit EuclideanS1(double circumference = 2 * 3.14159265358979323846)
      : circ_(circumference), deck_(circumference) {}

  double circumference() const { return circ_; }

  int dim() const override { return 4; }
  std::string name() const override { return "euclidean_s1"; }
  ChartId primary_chart() const override { return ChartId::cartesian; }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId, const std::array<S, 4>&) const {
    TMat<S> g(4);
    for (int i = 0; i < 4; ++i) g(i, i) = S(1.0);
    return g;
  }

  Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const override;
  ChartPoint distinguished_point() const override {
    return ChartPoint(ChartId::cartesian, Vec{0, 0, 0, 0});
  }
  double distance_to_o(const ChartPoint& p) const override {
    return quotient_distance(p, distinguished_point());
  }
  bool has_exact_quotient_distance() const override { return true; }
  double quotient_distance(const ChartPoint& a, const ChartPoint& b) const override;
  const DeckAction* deck() const override { return &deck_; }

  bool has_circle_action() const override { return true; }
  double orbit_length(const ChartPoint&) const override { return circ_; }
  Vec orbit_field(const ChartPoint&) const override { return Vec{0, 0, 0, circ_}; }

private:
  double circ_;
  TranslationDeck deck_;
};

}  // namespace collapselab

#endif
