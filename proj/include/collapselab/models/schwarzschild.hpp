#ifndef COLLAPSELAB_MODELS_SCHWARZSCHILD_HPP
#define COLLAPSELAB_MODELS_SCHWARZSCHILD_HPP

// Riemannian Schwarzschild on (2m, inf) x S^2 x S^1:
//   g = (1-2m/R)^{-1} dR^2 + R^2 (dtheta^2 + sin^2 dphi^2) + (1-2m/R) dtau^2,
// tau period 8*pi*m. Ricci-flat; used as the contraction oracle model.

#include <cmath>

#include "collapselab/model.hpp"

namespace collapselab {

class Schwarzschild final : public ModelBase<Schwarzschild> {
public:
  explicit Schwarzschild(double mass = 1.0) : m_(mass) {}

  double mass() const { return m_; }

  int dim() const override { return 4; }
  std::string name() const override { return "schwarzschild"; }
  ChartId primary_chart() const override { return ChartId::polar; }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId, const std::array<S, 4>& x) const {
    using std::sin;
    S f = 1.0 - 2.0 * m_ / x[0];
    S s = sin(x[1]);
    TMat<S> g(4);
    g(0, 0) = 1.0 / f;
    g(1, 1) = x[0] * x[0];
    g(2, 2) = x[0] * x[0] * s * s;
    g(3, 3) = f;
    return g;
  }

  Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const override;
  ChartPoint distinguished_point() const override {
    return ChartPoint(ChartId::polar, Vec{2.0 * m_ * (1.0 + 1e-6), 1.5707963267948966, 0.0, 0.0});
  }
  double distance_to_o(const ChartPoint& p) const override;

private:
  double m_;
};

}  // namespace collapselab

#endif
