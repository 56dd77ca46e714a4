#ifndef COLLAPSELAB_CURVATURE_HPP
#define COLLAPSELAB_CURVATURE_HPP

// Chart-based curvature evaluation: Christoffel symbols, the Riemann tensor
// (convention R^l_{kij} = dGamma_i - dGamma_j + GG - GG, lowered to
// R_{lkij} = <R(e_i,e_j)e_k, e_l>), derived norms, and the volume density.
// Models with analytic jets get exact derivatives; the central-difference
// path is kept as the generic fallback and as the independent test oracle.

#include "collapselab/chart.hpp"
#include "collapselab/model.hpp"

namespace collapselab {

struct CurvatureTensor {
  Ten4 lowered;  // R_{lkij}
  ChartPoint point;
};

MetricTensor metric_at(const ModelMetric& model, const ChartPoint& p);

// finite-difference step policy of the module
double fd_step(const Vec& coords);

// Gamma^k_{ij}; symmetric in (i,j)
Ten3 christoffel_at(const ModelMetric& model, const ChartPoint& p);

// explicitly finite-difference Christoffels with a caller-chosen step
// (Richardson-style oracles halve the step)
Ten3 christoffel_fd(const ModelMetric& model, const ChartPoint& p, double step);

// Gamma and its coordinate derivative dGamma(m, k, i, j) = d_m Gamma^k_{ij}
void christoffel_jet(const ModelMetric& model, const ChartPoint& p, Ten3& gamma, Ten4& dgamma);

CurvatureTensor riemann_at(const ModelMetric& model, const ChartPoint& p);

// |Rm| with all indices raised by the metric
double curvature_norm(const ModelMetric& model, const ChartPoint& p);

// |nabla^k Rm| for k = 1 (UnsupportedOrder otherwise)
double curvature_derivative_norm(const ModelMetric& model, const ChartPoint& p, int k);

// sqrt(det g)
double volume_density(const ModelMetric& model, const ChartPoint& p);

// Ricci contraction of a lowered Riemann tensor; norm uses the metric.
Mat ricci_from_riemann(const Mat& g, const Ten4& lowered);
double tensor2_norm(const Mat& g, const Mat& T);
double riemann_norm(const Mat& g, const Ten4& lowered);

// residuals for the invariant checks
double antisymmetry_residual(const Ten4& lowered);
double bianchi_residual(const Ten4& lowered);

// sectional curvature of the plane spanned by (u, v)
double sectional_curvature(const ModelMetric& model, const ChartPoint& p, const Vec& u,
                           const Vec& v);

}  // namespace collapselab

#endif
