#ifndef COLLAPSELAB_MODELS_TAUB_NUT_HPP
#define COLLAPSELAB_MODELS_TAUB_NUT_HPP

// Taub-NUT in two charts:
//   bianchi  (t, theta, phi, psi): g = dt^2 + (A/2)^2 (dtheta^2 + sin^2 dphi^2)
//                                  + (B/2)^2 (dpsi + cos(theta) dphi)^2
//            with A = 2H/H', B = H', H' = 1/sqrt(V(H)), V(r) = 1 + 1/(2r);
//            t is the Riemannian distance to the nut.
//   monopole (x, y, z, tau):       g = V g_R3 + V^{-1} (dtau + theta_pot)^2,
//            Dirac string down the negative z-axis, tau period 2*pi.
// psi has period 4*pi; the charts are glued by R = H(t), tau = (psi+phi)/2.

#include <cmath>
#include <memory>

#include "collapselab/interp.hpp"
#include "collapselab/model.hpp"

namespace collapselab {

// Radial profile H built by the adaptive ODE solve of H' = 1/sqrt(V(H)),
// H(0) = 0, cached on a dense grid. The separable closed form
//   t(H) = [sqrt(2H) sqrt(2H+1) + asinh(sqrt(2H))]/2
// serves as the independent oracle and as the Newton polish applied on top
// of the grid seed when machine-accurate values are needed.
class TaubNutProfile {
public:
  TaubNutProfile(double t_max, double tol);

  double t_max() const { return t_max_; }
  double H_grid(double t) const { return spline_(t); }       // cubic-spline value
  double H(double t) const;                                  // grid seed + Newton polish
  double dH(double t) const { return dH_of_H(H(t)); }        // H'(t)
  static double t_of_H(double Hv);                           // closed form
  static double dH_of_H(double Hv) { return std::sqrt(2 * Hv / (2 * Hv + 1)); }

  // grid export: rows (t, H, H')
  std::vector<std::array<double, 3>> grid_rows() const;

private:
  double t_max_ = 0;
  double dt_ = 0;
  UniformSpline spline_;
  std::vector<double> samples_;
};

std::shared_ptr<const TaubNutProfile> taub_nut_profile(double t_max, double tol);

namespace detail {
// Gauge factor f of a unit-charge monopole potential theta = f (x dy - y dx):
// f = (dz/r - sigma) / (2 rho2), sigma = +1 for a string down the local -z
// axis, -1 for the +z axis. Near the smooth half-axis the direct quotient is
// 0/0, so a series in rho2/dz^2 takes over.
template <typename S>
S monopole_gauge_factor(const S& dz, const S& rho2, double sigma, const S& r) {
  double z0 = scalar_value(dz), u0 = scalar_value(rho2);
  if (u0 < 1e-4 * z0 * z0) {
    S z2 = dz * dz;
    return sigma * (-0.25 / z2 + (3.0 / 16.0) * rho2 / (z2 * z2) -
                    (5.0 / 32.0) * rho2 * rho2 / (z2 * z2 * z2));
  }
  return 0.5 * (dz / r - sigma) / rho2;
}

// Evaluate H(t) in jet arithmetic through the cubic Taylor expansion around
// the double core of t (exact on 2-jets).
template <typename S>
S taub_H_jet(const TaubNutProfile& prof, const S& t) {
  double t0 = scalar_value(t);
  double H0 = prof.H(t0);
  double H1 = TaubNutProfile::dH_of_H(H0);
  double w = 2 * H0 + 1;
  double H2 = 1.0 / (w * w);
  double H3 = -4.0 * H1 / (w * w * w);
  S d = t - t0;
  return S(H0) + d * (S(H1) + d * (S(H2 / 2) + d * S(H3 / 6)));
}
}  // namespace detail

class TaubNut : public ModelBase<TaubNut> {
public:
  explicit TaubNut(double t_max = 2048.0, double tol = 1e-12);

  const TaubNutProfile& profile() const { return *profile_; }

  int dim() const override { return 4; }
  std::string name() const override { return "taub_nut"; }
  ChartId primary_chart() const override { return ChartId::bianchi; }
  std::vector<ChartId> charts() const override {
    return {ChartId::bianchi, ChartId::monopole};
  }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId chart, const std::array<S, 4>& x) const {
    if (chart == ChartId::bianchi) return bianchi_metric(x);
    return monopole_metric(x);
  }

  Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const override;
  ChartPoint distinguished_point() const override {
    // the nut; on the chart boundary, usable only through distance_to_o
    return ChartPoint(ChartId::bianchi, Vec{0.0, 1.5707963267948966, 0.0, 0.0});
  }
  double distance_to_o(const ChartPoint& p) const override;
  std::optional<ChartPoint> to_chart(const ChartPoint& p, ChartId target) const override;

  bool has_circle_action() const override { return true; }
  double orbit_length(const ChartPoint& p) const override;
  Vec orbit_field(const ChartPoint& p) const override;

protected:
  template <typename S>
  TMat<S> bianchi_metric(const std::array<S, 4>& x) const {
    using std::cos;
    using std::sin;
    S H = detail::taub_H_jet(*profile_, x[0]);
    S Hp = sqrt(2.0 * H / (2.0 * H + 1.0));
    S A = 2.0 * H / Hp;
    S B = Hp;
    S c = cos(x[1]), s = sin(x[1]);
    S A24 = A * A * 0.25, B24 = B * B * 0.25;
    TMat<S> g(4);
    g(0, 0) = S(1.0);
    g(1, 1) = A24;
    g(2, 2) = A24 * s * s + B24 * c * c;
    g(3, 3) = B24;
    g(2, 3) = B24 * c;
    g(3, 2) = g(2, 3);
    return g;
  }

  template <typename S>
  TMat<S> monopole_metric(const std::array<S, 4>& x) const {
    S r = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    S V = 1.0 + 0.5 / r;
    S rho2 = x[0] * x[0] + x[1] * x[1];
    S f = detail::monopole_gauge_factor(x[2], rho2, 1.0, r);  // string down -z
    S th[3] = {-f * x[1], f * x[0], S(0.0)};
    TMat<S> g(4);
    S Vinv = 1.0 / V;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) g(a, b) = th[a] * th[b] * Vinv;
      g(a, a) = g(a, a) + V;
      g(a, 3) = th[a] * Vinv;
      g(3, a) = g(a, 3);
    }
    g(3, 3) = Vinv;
    return g;
  }

  std::shared_ptr<const TaubNutProfile> profile_;
};

// Taub-NUT plus a small fiber-dependent term delta * (1+H)^{-2} sin^2(psi/2)
// dt^2: breaks the S^1 invariance at size O(delta r^{-2}) while keeping the
// exact orbits (test model for the averaging estimates).
class PerturbedTaubNut final : public ModelBase<PerturbedTaubNut> {
public:
  explicit PerturbedTaubNut(double delta, double t_max = 2048.0, double tol = 1e-12);

  double delta() const { return delta_; }
  const TaubNutProfile& profile() const { return *profile_; }

  int dim() const override { return 4; }
  std::string name() const override { return "taub_nut_perturbed"; }
  ChartId primary_chart() const override { return ChartId::bianchi; }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId, const std::array<S, 4>& x) const {
    using std::sin;
    S H = detail::taub_H_jet(*profile_, x[0]);
    S Hp = sqrt(2.0 * H / (2.0 * H + 1.0));
    S A = 2.0 * H / Hp;
    S B = Hp;
    S c = cos(x[1]), s = sin(x[1]);
    S A24 = A * A * 0.25, B24 = B * B * 0.25;
    TMat<S> g(4);
    S u = 1.0 + H;
    S sh = sin(0.5 * x[3]);
    g(0, 0) = 1.0 + delta_ * sh * sh / (u * u);
    g(1, 1) = A24;
    g(2, 2) = A24 * s * s + B24 * c * c;
    g(3, 3) = B24;
    g(2, 3) = B24 * c;
    g(3, 2) = g(2, 3);
    return g;
  }

  Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const override;
  ChartPoint distinguished_point() const override {
    return ChartPoint(ChartId::bianchi, Vec{0.0, 1.5707963267948966, 0.0, 0.0});
  }
  double distance_to_o(const ChartPoint& p) const override { return p.coords[0]; }

  // circle-action data of the underlying Taub-NUT orbits (the perturbation
  // keeps the orbits, only the metric loses exact invariance)
  bool has_circle_action() const override { return true; }
  double orbit_length(const ChartPoint& p) const override;
  Vec orbit_field(const ChartPoint&) const override {
    return Vec{0, 0, 0, 4 * 3.14159265358979323846};
  }

private:
  double delta_;
  std::shared_ptr<const TaubNutProfile> profile_;
};

}  // namespace collapselab

#endif
