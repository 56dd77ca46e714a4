#include <algorithm>
#include <cmath>

#include "collapselab/curvature.hpp"
#include "collapselab/errors.hpp"

namespace collapselab {

MetricTensor metric_at(const ModelMetric& model, const ChartPoint& p) {
  return MetricTensor(model.metric_components(p));
}

double fd_step(const Vec& coords) { return std::max(1e-5, 1e-4 * norm(coords)); }

namespace {
Ten3 christoffel_from_jet(const Mat& g, const Ten3& dg) {
  int n = g.n;
  Mat ginv;
  if (!invert(g, ginv)) throw SingularPoint("metric not invertible");
  Ten3 gamma(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0;
        for (int l = 0; l < n; ++l)
          s += ginv(k, l) * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
        gamma(k, i, j) = 0.5 * s;
        gamma(k, j, i) = gamma(k, i, j);
      }
  return gamma;
}
}  // namespace

Ten3 christoffel_fd(const ModelMetric& model, const ChartPoint& p, double step) {
  int n = model.dim();
  Mat g = model.metric_components(p);
  Ten3 dg(n);
  for (int m = 0; m < n; ++m) {
    ChartPoint pp = p, pm = p;
    pp.coords[m] += step;
    pm.coords[m] -= step;
    Mat gp = model.metric_components(pp);
    Mat gm = model.metric_components(pm);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) dg(m, i, j) = (gp(i, j) - gm(i, j)) / (2 * step);
  }
  return christoffel_from_jet(g, dg);
}

Ten3 christoffel_at(const ModelMetric& model, const ChartPoint& p) {
  if (model.has_analytic_jets()) {
    Mat g;
    Ten3 dg;
    model.metric_jet1(p, g, dg);
    return christoffel_from_jet(g, dg);
  }
  return christoffel_fd(model, p, fd_step(p.coords));
}

void christoffel_jet(const ModelMetric& model, const ChartPoint& p, Ten3& gamma, Ten4& dgamma) {
  int n = model.dim();
  if (model.has_analytic_jets()) {
    Mat g;
    Ten3 dg;
    Ten4 ddg;
    model.metric_jet2(p, g, dg, ddg);
    gamma = christoffel_from_jet(g, dg);
    // dGamma by differentiating Gamma = (1/2) g^{-1} (dg + dg - dg):
    // d_m Gamma^k_{ij} = (1/2) [ d_m g^{kl} (..)_{lij} + g^{kl} d_m (..)_{lij} ]
    // with d_m g^{kl} = -g^{ka} d_m g_{ab} g^{bl}
    Mat ginv;
    if (!invert(g, ginv)) throw SingularPoint("metric not invertible");
    dgamma = Ten4(n);
    for (int m = 0; m < n; ++m) {
      Mat dginv(n);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double s = 0;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) s += ginv(k, a) * dg(m, a, b) * ginv(b, l);
          dginv(k, l) = -s;
        }
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) {
            double s = 0;
            for (int l = 0; l < n; ++l) {
              double sym = dg(i, j, l) + dg(j, i, l) - dg(l, i, j);
              double dsym = ddg(m, i, j, l) + ddg(m, j, i, l) - ddg(m, l, i, j);
              s += dginv(k, l) * sym + ginv(k, l) * dsym;
            }
            dgamma(m, k, i, j) = 0.5 * s;
            dgamma(m, k, j, i) = dgamma(m, k, i, j);
          }
    }
    return;
  }
  // fallback: finite differences of the finite-difference Christoffels
  double h = fd_step(p.coords);
  gamma = christoffel_fd(model, p, h);
  dgamma = Ten4(n);
  for (int m = 0; m < n; ++m) {
    ChartPoint pp = p, pm = p;
    pp.coords[m] += h;
    pm.coords[m] -= h;
    Ten3 gp = christoffel_fd(model, pp, h);
    Ten3 gm = christoffel_fd(model, pm, h);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          dgamma(m, k, i, j) = (gp(k, i, j) - gm(k, i, j)) / (2 * h);
  }
}

CurvatureTensor riemann_at(const ModelMetric& model, const ChartPoint& p) {
  int n = model.dim();
  Ten3 gamma;
  Ten4 dgamma;
  christoffel_jet(model, p, gamma, dgamma);
  Mat g = model.metric_components(p);

  // R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
  //             + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
  Ten4 up(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = dgamma(i, l, j, k) - dgamma(j, l, i, k);
          for (int m = 0; m < n; ++m)
            s += gamma(l, i, m) * gamma(m, j, k) - gamma(l, j, m) * gamma(m, i, k);
          up(l, k, i, j) = s;
        }

  CurvatureTensor R;
  R.point = p;
  R.lowered = Ten4(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0;
          for (int m = 0; m < n; ++m) s += g(l, m) * up(m, k, i, j);
          R.lowered(l, k, i, j) = s;
        }
  return R;
}

Mat ricci_from_riemann(const Mat& g, const Ten4& lowered) {
  int n = g.n;
  Mat ginv;
  invert(g, ginv);
  // Ric_{kj} = g^{li} R_{lkij}
  Mat ric(n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int l = 0; l < n; ++l)
        for (int i = 0; i < n; ++i) s += ginv(l, i) * lowered(l, k, i, j);
      ric(k, j) = s;
    }
  return ric;
}

double tensor2_norm(const Mat& g, const Mat& T) {
  int n = g.n;
  Mat ginv;
  invert(g, ginv);
  double s = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) s += ginv(i, a) * ginv(j, b) * T(i, j) * T(a, b);
  return std::sqrt(std::max(0.0, s));
}

double riemann_norm(const Mat& g, const Ten4& lowered) {
  int n = g.n;
  Mat ginv;
  invert(g, ginv);
  double s = 0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double up = 0;
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d)
                  up += ginv(l, a) * ginv(k, b) * ginv(i, c) * ginv(j, d) * lowered(a, b, c, d);
          s += up * lowered(l, k, i, j);
        }
  return std::sqrt(std::max(0.0, s));
}

double curvature_norm(const ModelMetric& model, const ChartPoint& p) {
  CurvatureTensor R = riemann_at(model, p);
  Mat g = model.metric_components(p);
  return riemann_norm(g, R.lowered);
}

double antisymmetry_residual(const Ten4& lowered) {
  int n = lowered.n;
  double res = 0, scale = 0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          scale = std::max(scale, std::fabs(lowered(l, k, i, j)));
          res = std::max(res, std::fabs(lowered(l, k, i, j) + lowered(l, k, j, i)));
          res = std::max(res, std::fabs(lowered(l, k, i, j) + lowered(k, l, i, j)));
        }
  return (scale > 0) ? res / scale : res;
}

double bianchi_residual(const Ten4& lowered) {
  int n = lowered.n;
  double res = 0, scale = 0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          scale = std::max(scale, std::fabs(lowered(l, k, i, j)));
          double b = lowered(l, k, i, j) + lowered(l, i, j, k) + lowered(l, j, k, i);
          res = std::max(res, std::fabs(b));
        }
  return (scale > 0) ? res / scale : res;
}

double curvature_derivative_norm(const ModelMetric& model, const ChartPoint& p, int k) {
  if (k != 1) throw UnsupportedOrder("curvature_derivative_norm supports k = 1 only");
  int n = model.dim();
  double h = fd_step(p.coords);
  Ten3 gamma = christoffel_at(model, p);

  // nabla_m R_{ijkl} = d_m R_{ijkl} - Gamma^p_{m i} R_{pjkl} - ... (4 slots)
  std::array<Ten4, 4> dR;
  for (int m = 0; m < n; ++m) {
    ChartPoint pp = p, pm = p;
    pp.coords[m] += h;
    pm.coords[m] -= h;
    Ten4 Rp = riemann_at(model, pp).lowered;
    Ten4 Rm = riemann_at(model, pm).lowered;
    dR[m] = Ten4(n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d)
            dR[m](a, b, c, d) = (Rp(a, b, c, d) - Rm(a, b, c, d)) / (2 * h);
  }
  Ten4 R = riemann_at(model, p).lowered;
  Mat g = model.metric_components(p);
  Mat ginv;
  invert(g, ginv);

  // norm^2 = g^{mm'} g^{aa'} g^{bb'} g^{cc'} g^{dd'} (nabla R) (nabla R)
  double s = 0;
  // store nabla_m R in a flat scratch
  std::vector<double> nr(std::size_t(n) * n * n * n * n);
  auto at = [&](int m, int a, int b, int c, int d) -> double& {
    return nr[((((std::size_t(m) * n + a) * n + b) * n + c) * n) + d];
  };
  for (int m = 0; m < n; ++m)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double v = dR[m](a, b, c, d);
            for (int q = 0; q < n; ++q) {
              v -= gamma(q, m, a) * R(q, b, c, d);
              v -= gamma(q, m, b) * R(a, q, c, d);
              v -= gamma(q, m, c) * R(a, b, q, d);
              v -= gamma(q, m, d) * R(a, b, c, q);
            }
            at(m, a, b, c, d) = v;
          }
  for (int m = 0; m < n; ++m)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double up = 0;
            for (int m2 = 0; m2 < n; ++m2)
              for (int a2 = 0; a2 < n; ++a2)
                for (int b2 = 0; b2 < n; ++b2)
                  for (int c2 = 0; c2 < n; ++c2)
                    for (int d2 = 0; d2 < n; ++d2)
                      up += ginv(m, m2) * ginv(a, a2) * ginv(b, b2) * ginv(c, c2) *
                            ginv(d, d2) * at(m2, a2, b2, c2, d2);
            s += up * at(m, a, b, c, d);
          }
  return std::sqrt(std::max(0.0, s));
}

double volume_density(const ModelMetric& model, const ChartPoint& p) {
  Mat g = model.metric_components(p);
  double det = determinant(g);
  if (det <= 0) throw SingularPoint("volume_density: metric not positive definite");
  return std::sqrt(det);
}

double sectional_curvature(const ModelMetric& model, const ChartPoint& p, const Vec& u,
                           const Vec& v) {
  CurvatureTensor R = riemann_at(model, p);
  Mat g = model.metric_components(p);
  int n = g.n;
  // K = <R(u,v)v, u> / (|u|^2 |v|^2 - <u,v>^2)
  double num = 0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          num += R.lowered(l, k, i, j) * u[l] * v[k] * u[i] * v[j];
  double uu = dot(g * u, u), vv = dot(g * v, v), uv = dot(g * u, v);
  double den = uu * vv - uv * uv;
  return num / den;
}

}  // namespace collapselab
