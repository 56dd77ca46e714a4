#ifndef COLLAPSELAB_MODELS_MULTI_TAUB_NUT_HPP
#define COLLAPSELAB_MODELS_MULTI_TAUB_NUT_HPP

// Multi-Taub-NUT (A_{N-1} ALF instanton) in the monopole chart:
//   V(x) = 1 + sum_i 1/(2|x - p_i|),  g = V g_R3 + V^{-1} (dtau + theta)^2,
// theta a sum of unit-charge monopole potentials, one per nut. Each nut's
// Dirac string points away from the nut centroid along z, so the region
// between the nuts stays inside the chart.

#include <cmath>
#include <vector>

#include "collapselab/model.hpp"
#include "collapselab/models/taub_nut.hpp"

namespace collapselab {

class MultiTaubNut final : public ModelBase<MultiTaubNut> {
public:
  explicit MultiTaubNut(std::vector<Vec> nuts);

  const std::vector<Vec>& nuts() const { return nuts_; }

  int dim() const override { return 4; }
  std::string name() const override { return "multi_taub_nut"; }
  ChartId primary_chart() const override { return ChartId::monopole; }
  void check_point(const ChartPoint& p) const override;

  template <typename S>
  TMat<S> metric_eval(ChartId, const std::array<S, 4>& x) const {
    S V(1.0);
    S th[3] = {S(0.0), S(0.0), S(0.0)};
    for (std::size_t i = 0; i < nuts_.size(); ++i) {
      S dx = x[0] - nuts_[i][0], dy = x[1] - nuts_[i][1], dz = x[2] - nuts_[i][2];
      S r = sqrt(dx * dx + dy * dy + dz * dz);
      V = V + 0.5 / r;
      S rho2 = dx * dx + dy * dy;
      S f = detail::monopole_gauge_factor(dz, rho2, string_sign_[i], r);
      th[0] = th[0] - f * dy;
      th[1] = th[1] + f * dx;
    }
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

  Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const override;
  ChartPoint distinguished_point() const override { return o_; }
  double distance_to_o(const ChartPoint& p) const override;

  bool has_circle_action() const override { return true; }
  double orbit_length(const ChartPoint& p) const override;
  Vec orbit_field(const ChartPoint&) const override {
    return Vec{0, 0, 0, 2 * 3.14159265358979323846};
  }

  double potential(const Vec& xyz) const;

private:
  std::vector<Vec> nuts_;
  std::vector<double> string_sign_;  // +1: string down (-z), -1: string up (+z)
  ChartPoint o_;
};

}  // namespace collapselab

#endif
