#include <algorithm>
#include <cmath>
#include <limits>

#include "collapselab/curvature.hpp"
#include "collapselab/errors.hpp"
#include "collapselab/fibration.hpp"
#include "collapselab/ode.hpp"
#include "collapselab/rng.hpp"

namespace collapselab {

namespace {
constexpr double kPi = 3.14159265358979323846;

double smoothstep5(double s) { return s * s * s * (10 + s * (-15 + 6 * s)); }

// C^2 taper for the lift window: 1 on [0, 0.85], 0 beyond 1
double lift_window(double u) {
  if (u <= 0.85) return 1.0;
  if (u >= 1.0) return 0.0;
  return 1.0 - smoothstep5((u - 0.85) / 0.15);
}

struct Quad1D {
  std::vector<double> x, w;  // nodes and weights on [-1, 1] scaled per cell
};

Quad1D make_quad(double lo, double hi, const QuadRule& rule) {
  static const double x4[] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                              0.8611363115940526};
  static const double w4[] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                              0.3478548451374538};
  static const double x6[] = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                              0.2386191860831969, 0.6612093864662645, 0.9324695142031521};
  static const double w6[] = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                              0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
  const double* gx = rule.order >= 6 ? x6 : x4;
  const double* gw = rule.order >= 6 ? w6 : w4;
  int n = rule.order >= 6 ? 6 : 4;
  Quad1D q;
  for (int c = 0; c < rule.cells; ++c) {
    double a = lo + (hi - lo) * double(c) / rule.cells;
    double b = lo + (hi - lo) * double(c + 1) / rule.cells;
    double hc = (b - a) / 2, mc = (a + b) / 2;
    for (int i = 0; i < n; ++i) {
      q.x.push_back(mc + hc * gx[i]);
      q.w.push_back(hc * gw[i]);
    }
  }
  return q;
}
}  // namespace

double chi_profile(double u) {
  if (u <= 1.0 / 3.0) return 1.0;
  if (u >= 2.0 / 3.0) return 0.0;
  return 1.0 - smoothstep5(3.0 * (u - 1.0 / 3.0));
}

double chi_eps(double t, double eps) { return chi_profile(2.0 * t / (eps * eps)); }

Vec GHChart::project_H(const Vec& w_frame) const {
  int d = dim();
  Vec out(d - 1);
  for (int i = 0; i < d - 1; ++i) {
    double s = 0;
    for (int r = 0; r < d; ++r) s += adapted(r, i) * w_frame[r];
    out[i] = s;
  }
  return out;
}

Vec GHChart::h_direction() const {
  int d = dim();
  Vec out(d);
  for (int r = 0; r < d; ++r) out[r] = adapted(r, d - 1);
  return out;
}

Vec GHChart::h_of_lift(const Vec& w_frame) const {
  auto lifts = ball->lifts_of(w_frame, lift_radius);
  if (lifts.empty()) throw NoLifts("gh_chart: no lift inside the window");
  Vec mean(dim() - 1);
  for (const Vec& v : lifts) mean += project_H(v);
  return (1.0 / double(lifts.size())) * mean;
}

Vec GHChart::h_smooth(const Vec& w_frame) const {
  auto lifts = ball->lifts_of(w_frame, lift_radius);
  if (lifts.empty()) throw NoLifts("gh_chart: no lift inside the window");
  Vec mean(dim() - 1);
  double wsum = 0;
  for (const Vec& v : lifts) {
    double wgt = lift_window(norm(v) / lift_radius);
    if (wgt <= 0) continue;
    mean += wgt * project_H(v);
    wsum += wgt;
  }
  if (wsum <= 0) throw NoLifts("gh_chart: all lifts in the window taper");
  return (1.0 / wsum) * mean;
}

Vec GHChart::h(const ChartPoint& y) const {
  LogResult lr = log_map_auto(ball->model(), ball->center(), y, ball->geo());
  if (!lr.converged) throw NoLifts("gh_chart: shooting found no lift of y");
  return h_of_lift(ball->chart_to_frame(lr.v.components));
}

namespace {
GHChart make_chart(std::shared_ptr<LiftedBall> ball, double kappa, double scale,
                   const Vec& axis_frame) {
  GHChart chart;
  chart.ball = std::move(ball);
  chart.kappa = kappa;
  chart.scale = scale;
  chart.lift_radius = scale / 2;
  // circle-action models: cap the lift window at a few fiber lengths; the
  // center of mass only needs the nearest lift layer, and the far lifts the
  // full kappa*r/2 window would add shift it by less than the tested bounds
  if (chart.ball->model().has_circle_action() &&
      std::isfinite(chart.ball->inj_estimate()))
    chart.lift_radius = std::min(chart.lift_radius, 3.2 * chart.ball->inj_estimate());
  chart.target_radius = 0.1 * scale;
  int d = chart.ball->center().dim();
  // adapted orthonormal basis: last column along the loop direction
  Vec a = normalized(axis_frame);
  Mat A(d);
  for (int r = 0; r < d; ++r) A(r, d - 1) = a[r];
  int col = 0;
  for (int e = 0; e < d && col < d - 1; ++e) {
    Vec v = Vec::basis(d, e);
    v -= dot(v, a) * a;
    for (int j = 0; j < col; ++j) {
      Vec ej(d);
      for (int r = 0; r < d; ++r) ej[r] = A(r, j);
      v -= dot(v, ej) * ej;
    }
    if (norm(v) < 1e-6) continue;
    v = normalized(v);
    for (int r = 0; r < d; ++r) A(r, col) = v[r];
    ++col;
  }
  chart.adapted = A;
  return chart;
}
}  // namespace

GHChart gh_chart(const ModelMetric& model, const ChartPoint& x, double kappa,
                 const PseudoGroupOptions& opts) {
  double r = model.distance_to_o(x);
  double scale = kappa * r;
  auto ball = std::make_shared<LiftedBall>(model, x, scale, opts);
  const PseudoGroupElement* fund = ball->fundamental();
  if (!fund)
    throw NoLifts("gh_chart: no loop at scale kappa r(x); use gh_chart_trivial with an axis");
  return make_chart(std::move(ball), kappa, scale, fund->lift_vector);
}

GHChart gh_chart_trivial(const ModelMetric& model, const ChartPoint& x, double kappa,
                         const Vec& axis_chart, const PseudoGroupOptions& opts) {
  double r = std::max(model.distance_to_o(x), 10.0 / std::max(kappa, 1e-9));
  double scale = kappa * r;
  auto ball = std::make_shared<LiftedBall>(model, x, scale, opts);
  return make_chart(std::move(ball), kappa, scale, ball->chart_to_frame(axis_chart));
}

double gh_pair_defect(const GHChart& chart, int n_pairs, std::uint64_t seed) {
  const ModelMetric& model = chart.ball->model();
  if (!model.has_exact_quotient_distance())
    throw ChartExceeded("gh_pair_defect needs an exact quotient distance");
  Rng rng(seed);
  int d = chart.dim();
  double rad = 0.9 * chart.target_radius;
  double worst = 0;
  for (int i = 0; i < n_pairs; ++i) {
    Vec wy = rng.in_ball(d, rad), wz = rng.in_ball(d, rad);
    ChartPoint y = chart.ball->exp_frame(wy), z = chart.ball->exp_frame(wz);
    Vec hy = chart.h_of_lift(wy), hz = chart.h_of_lift(wz);
    double dq = model.quotient_distance(y, z);
    worst = std::max(worst, std::fabs(dq - norm(hy - hz)));
  }
  return worst;
}

FibrationChart::FibrationChart(GHChart gh, double epsilon, QuadRule rule)
    : gh_(std::move(gh)), epsilon_(epsilon), rule_(rule) {
  trace_rule = QuadRule{2, 4};
  // curved models answer quadrature/lift queries through the interpolation
  // caches; cover the traced region (fiber arc + chi support + margin)
  const ModelMetric& model = gh_.ball->model();
  if (!model.deck() && model.name() != "euclidean") {
    const PseudoGroupElement* fund = gh_.ball->fundamental();
    double L = fund ? norm(fund->lift_vector) : 0.0;
    double margin = 1.3 * epsilon_ + 0.6;
    int d = gh_.dim();
    // box in frame coordinates, elongated along the loop axis so the whole
    // lifted fiber arc (plus the convolution support) is covered
    Vec lo(d), hi(d);
    Vec axis = gh_.h_direction();
    double along = L + margin;
    double across = 0.45 * L + margin;
    for (int a = 0; a < d; ++a) {
      double ax = std::fabs(axis[a]);
      double half = ax * along + (1 - ax) * across + 0.5;
      lo[a] = -half;
      hi[a] = half;
    }
    // the cubic interpolant reproduces the affine part of tau exactly, so the
    // grid only has to resolve the curvature corrections (scale ~ r): half
    // the convolution scale is comfortably fine
    gh_.ball->build_tau_cache(lo, hi, std::max(0.9, epsilon_ / 2.0));
  }
  // one-shot quadrature error estimate at a probe point
  Vec probe(gh_.dim());
  Vec f1 = f_of_lift(probe, rule_);
  QuadRule finer{rule_.cells + 1, rule_.order >= 6 ? 6 : 4};
  Vec f2 = f_of_lift(probe, finer);
  quad_error_ = norm(f1 - f2) / std::max(1.0, norm(f2));
  if (quad_error_ > 1e-3)
    throw QuadratureFailure("relative quadrature error estimate " +
                            std::to_string(quad_error_) + " > 1e-3");
}

Vec FibrationChart::f_of_lift(const Vec& w_frame, const QuadRule& rule) const {
  int d = gh_.dim();
  double support = 0.8165 * epsilon_ * 1.02;
  Quad1D q[4];
  for (int a = 0; a < d; ++a) q[a] = make_quad(w_frame[a] - support, w_frame[a] + support, rule);
  int nq = int(q[0].x.size());
  Vec num(d - 1);
  double den = 0;
  Vec v(d);
  const bool flat = gh_.ball->model().deck() || gh_.ball->model().name() == "euclidean";
  for (int i0 = 0; i0 < nq; ++i0) {
    v[0] = q[0].x[i0];
    for (int i1 = 0; i1 < nq; ++i1) {
      v[1] = q[1].x[i1];
      for (int i2 = 0; i2 < nq; ++i2) {
        v[2] = q[2].x[i2];
        double w012 = q[0].w[i0] * q[1].w[i1] * q[2].w[i2];
        for (int i3 = 0; i3 < (d == 4 ? nq : 1); ++i3) {
          double wq = w012;
          if (d == 4) {
            v[3] = q[3].x[i3];
            wq *= q[3].w[i3];
          }
          // chi argument: ghat-distance(v, w)^2 / 2 by a metric chord; the
          // density is the volume element at the integration variable
          Vec dvw = v - w_frame;
          double dist2;
          double dens = 1.0;
          if (flat) {
            dist2 = dot(dvw, dvw);
          } else {
            Mat gm = gh_.ball->lifted_metric(v);
            dist2 = dot(gm * dvw, dvw);
            dens = std::sqrt(std::max(0.0, determinant(gm)));
          }
          double chi = chi_eps(0.5 * dist2, epsilon_);
          if (chi <= 0) continue;
          Vec hv;
          try {
            hv = gh_.h_smooth(v);
          } catch (const NoLifts&) {
            continue;
          }
          num += (wq * chi * dens) * hv;
          den += wq * chi * dens;
        }
      }
    }
  }
  if (den <= 0) throw QuadratureFailure("empty convolution window");
  return (1.0 / den) * num;
}

Vec FibrationChart::f(const ChartPoint& y) const {
  LogResult lr = log_map_auto(gh_.ball->model(), gh_.ball->center(), y, gh_.ball->geo());
  if (!lr.converged) throw NoLifts("fibration: no lift of the query point");
  return f_of_lift(gh_.ball->chart_to_frame(lr.v.components));
}

Mat FibrationChart::df_of_lift(const Vec& w_frame, const QuadRule& rule) const {
  int d = gh_.dim();
  double h = epsilon_ / 30.0;
  Mat out(d);  // rows 0..d-2 hold df; row d-1 stays zero
  for (int c = 0; c < d; ++c) {
    Vec wp = w_frame, wm = w_frame;
    wp[c] += h;
    wm[c] -= h;
    Vec fp = f_of_lift(wp, rule), fm = f_of_lift(wm, rule);
    for (int r = 0; r < d - 1; ++r) out(r, c) = (fp[r] - fm[r]) / (2 * h);
  }
  return out;
}

FibrationChart::PointDiagnostics FibrationChart::diagnostics_at(const Vec& w_frame) const {
  int d = gh_.dim();
  PointDiagnostics diag;
  Mat df = df_of_lift(w_frame, rule_);

  // ghat-orthonormalize the domain: singular values of df * ghat^{-1/2}
  Mat ghat = gh_.ball->lifted_metric(w_frame);
  Vec ev;
  Mat V;
  symmetric_eigen(ghat, ev, V);
  Mat S(d);  // ghat^{-1/2}
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0;
      for (int k = 0; k < d; ++k) s += V(i, k) * V(j, k) / std::sqrt(std::max(ev[k], 1e-300));
      S(i, j) = s;
    }
  Mat dfS = df * S;
  diag.singular_values = singular_values(dfS, d - 1);

  // covariant Hessian norm: second differences plus the ghat-connection term
  double h = epsilon_ / 25.0;
  std::vector<Mat> hess(d - 1, Mat(d));
  Vec f0 = f_of_lift(w_frame, rule_);
  for (int i = 0; i < d; ++i) {
    Vec dp = w_frame, dm = w_frame;
    dp[i] += h;
    dm[i] -= h;
    Vec fp = f_of_lift(dp, rule_), fm = f_of_lift(dm, rule_);
    for (int r = 0; r < d - 1; ++r) hess[r](i, i) = (fp[r] - 2 * f0[r] + fm[r]) / (h * h);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Vec wpp = w_frame, wpm = w_frame, wmp = w_frame, wmm = w_frame;
      wpp[i] += h;
      wpp[j] += h;
      wpm[i] += h;
      wpm[j] -= h;
      wmp[i] -= h;
      wmp[j] += h;
      wmm[i] -= h;
      wmm[j] -= h;
      Vec fpp = f_of_lift(wpp, rule_), fpm = f_of_lift(wpm, rule_);
      Vec fmp = f_of_lift(wmp, rule_), fmm = f_of_lift(wmm, rule_);
      for (int r = 0; r < d - 1; ++r) {
        double v2 = (fpp[r] - fpm[r] - fmp[r] + fmm[r]) / (4 * h * h);
        hess[r](i, j) = v2;
        hess[r](j, i) = v2;
      }
    }
  // connection correction of the lifted metric (zero on flat models)
  const bool flat = gh_.ball->model().deck() || gh_.ball->model().name() == "euclidean";
  if (!flat) {
    double hg = 0.25;
    Ten3 gamma(d);
    {
      Mat g0 = ghat;
      Mat ginv;
      invert(g0, ginv);
      Ten3 dg(d);
      for (int m = 0; m < d; ++m) {
        Vec wp = w_frame, wm = w_frame;
        wp[m] += hg;
        wm[m] -= hg;
        Mat gp = gh_.ball->lifted_metric(wp);
        Mat gm = gh_.ball->lifted_metric(wm);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) dg(m, i, j) = (gp(i, j) - gm(i, j)) / (2 * hg);
      }
      for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            double s = 0;
            for (int l = 0; l < d; ++l)
              s += ginv(k, l) * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j));
            gamma(k, i, j) = 0.5 * s;
          }
    }
    for (int r = 0; r < d - 1; ++r)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double corr = 0;
          for (int k = 0; k < d; ++k) corr += gamma(k, i, j) * df(r, k);
          hess[r](i, j) -= corr;
        }
  }
  double h2 = 0;
  for (int r = 0; r < d - 1; ++r) {
    double fn = frobenius_norm(hess[r]);
    h2 += fn * fn;
  }
  diag.hessian_norm = std::sqrt(h2);

  // kernel direction vs the circle-orbit direction
  diag.kernel_angle_to_fiber = std::numeric_limits<double>::quiet_NaN();
  const ModelMetric& model = gh_.ball->model();
  if (model.has_circle_action()) {
    Vec kern = null_direction(df, d - 1);
    ChartPoint p = gh_.ball->exp_frame(w_frame);
    Vec fiber_chart = model.orbit_field(p);
    // push the fiber direction back to the lift coordinates: at w the lift of
    // the orbit through exp(w) has tangent J^{-1} * fiber
    ExpJet jet = exp_with_jacobian(model, gh_.ball->center(),
                                   gh_.ball->frame_to_chart(w_frame), gh_.ball->geo());
    Mat Jinv;
    invert(jet.d_end_d_v, Jinv);
    Vec fiber_lift = gh_.ball->chart_to_frame(Jinv * fiber_chart);
    double c = std::fabs(dot(ghat * kern, fiber_lift)) /
               (std::sqrt(dot(ghat * kern, kern)) * std::sqrt(dot(ghat * fiber_lift, fiber_lift)));
    diag.kernel_angle_to_fiber = std::acos(std::min(1.0, c));
  }
  return diag;
}

FibrationChart smooth_fibration(const GHChart& chart, double epsilon, QuadRule rule) {
  return FibrationChart(chart, epsilon, rule);
}

std::vector<FibrationChart::PointDiagnostics> submersion_diagnostics(
    const FibrationChart& chart, const std::vector<Vec>& lift_points) {
  std::vector<FibrationChart::PointDiagnostics> out;
  out.reserve(lift_points.size());
  for (const Vec& w : lift_points) out.push_back(chart.diagnostics_at(w));
  return out;
}

FiberRecord fiber_extract(const FibrationChart& chart, const Vec& b) {
  const GHChart& gh = chart.gh();
  int d = gh.dim();
  const PseudoGroupElement* fund = gh.ball->fundamental();
  if (!fund) throw OpenFiber("fiber_extract: no fundamental loop to close against");
  double expected = norm(fund->lift_vector);
  double step = 0.01 * expected;

  // seed on the level set near the center
  Vec w(d);
  for (int it = 0; it < 30; ++it) {
    Vec fv = chart.f_of_lift(w, chart.trace_rule);
    Vec res = fv - b;
    if (norm(res) < 1e-10 * std::max(1.0, norm(b))) break;
    Mat df = chart.df_of_lift(w, chart.trace_rule);
    // least-norm correction: df^T (df df^T)^{-1} res
    Mat dft(d);
    for (int i = 0; i < d; ++i)
      for (int r = 0; r < d - 1; ++r) dft(i, r) = df(r, i);
    Mat gram(d - 1);
    for (int r = 0; r < d - 1; ++r)
      for (int s = 0; s < d - 1; ++s) {
        double acc = 0;
        for (int i = 0; i < d; ++i) acc += df(r, i) * df(s, i);
        gram(r, s) = acc;
      }
    Mat ginv;
    if (!invert(gram, ginv)) throw OpenFiber("fiber_extract: singular differential at seed");
    Vec lam(d - 1);
    {
      Vec rr(d - 1);
      for (int r = 0; r < d - 1; ++r) rr[r] = res[r];
      lam = ginv * rr;
    }
    Vec stepv(d);
    for (int i = 0; i < d; ++i) {
      double acc = 0;
      for (int r = 0; r < d - 1; ++r) acc += df(r, i) * lam[r];
      stepv[i] = acc;
    }
    w -= stepv;
    if (norm(res) < 1e-8) break;
  }

  FiberRecord rec;
  rec.base_value = b;
  rec.curve.push_back(w);

  Vec w0 = w;
  Vec target_fwd = gh.ball->tau_power_apply(fund->word_power >= 0 ? 1 : -1, w0);
  // choose the closure target as the tau-image of the seed
  Vec tangent_prev;
  bool have_tangent = false;
  Mat df = chart.df_of_lift(w, chart.trace_rule);
  double travelled = 0;
  double fdev = 0;
  double kappa_max = 0;
  int refresh = 0;
  const double max_len = 2.2 * expected;
  while (travelled < max_len) {
    Vec tangent = null_direction(df, d - 1);
    if (have_tangent && dot(tangent, tangent_prev) < 0) tangent = -1.0 * tangent;
    if (!have_tangent) {
      // orient along the loop direction
      if (dot(tangent, gh.h_direction()) < 0) tangent = -1.0 * tangent;
    }
    if (have_tangent) {
      double dk = norm(tangent - tangent_prev) / step;
      kappa_max = std::max(kappa_max, dk);
    }
    tangent_prev = tangent;
    have_tangent = true;
    Vec w_pred = w + step * tangent;
    // corrector: project back to the level set
    for (int it = 0; it < 3; ++it) {
      Vec res = chart.f_of_lift(w_pred, chart.trace_rule) - b;
      double rn = norm(res);
      fdev = std::max(fdev, rn);
      if (rn < 1e-5 * chart.epsilon()) break;
      Mat gram(d - 1);
      for (int r = 0; r < d - 1; ++r)
        for (int s = 0; s < d - 1; ++s) {
          double acc = 0;
          for (int i = 0; i < d; ++i) acc += df(r, i) * df(s, i);
          gram(r, s) = acc;
        }
      Mat ginv;
      if (!invert(gram, ginv)) break;
      Vec rr(d - 1);
      for (int r = 0; r < d - 1; ++r) rr[r] = res[r];
      Vec lam = ginv * rr;
      Vec stepv(d);
      for (int i = 0; i < d; ++i) {
        double acc = 0;
        for (int r = 0; r < d - 1; ++r) acc += df(r, i) * lam[r];
        stepv[i] = acc;
      }
      w_pred -= stepv;
    }
    // ghat arclength increment
    Vec dseg = w_pred - w;
    Mat gm = gh.ball->lifted_metric(0.5 * (w + w_pred));
    travelled += std::sqrt(std::max(0.0, dot(gm * dseg, dseg)));
    w = w_pred;
    rec.curve.push_back(w);
    if (++refresh % 5 == 0) df = chart.df_of_lift(w, chart.trace_rule);

    if (travelled > 0.5 * expected) {
      Vec dclose = target_fwd - w;
      if (norm(dclose) < 1.5 * step) {
        // close up onto the tau-image of the seed; the defect is the miss
        // transverse to the curve direction (the tangential part is just the
        // remaining arc)
        Vec transverse = dclose - dot(dclose, tangent_prev) * tangent_prev;
        rec.closure_defect = norm(transverse);
        Mat gc = gh.ball->lifted_metric(0.5 * (w + target_fwd));
        travelled += std::sqrt(std::max(0.0, dot(gc * dclose, dclose)));
        rec.curve.push_back(target_fwd);
        rec.length = travelled;
        rec.max_f_deviation = fdev;
        rec.second_form_max = kappa_max;
        return rec;
      }
    }
  }
  throw OpenFiber("fiber trace exceeded twice the expected length without closing");
}

MetricTensor fiber_average_metric(const ModelMetric& model, const ChartPoint& p,
                                  int quad_cells) {
  if (!model.has_circle_action())
    throw ChartExceeded("fiber_average_metric needs the model's circle action");
  int n = model.dim();
  // flow of W = orbit_field (time-1 period); integrate (y, Y = dflow) and
  // average Y^T g(y) Y at Gauss nodes of [0, 1]
  Quad1D q = make_quad(0.0, 1.0, QuadRule{quad_cells, 4});
  Mat avg(n);
  auto rhs = [&](double, const OdeState& s, OdeState& ds) {
    ChartPoint y(p.chart, Vec(n));
    for (int i = 0; i < n; ++i) y.coords[i] = s[i];
    Vec W = model.orbit_field(y);
    for (int i = 0; i < n; ++i) ds[i] = W[i];
    // dY = DW(y) Y; DW by central differences of the orbit field
    double h = 1e-5 * (1 + norm(y.coords));
    Mat DW(n);
    for (int c = 0; c < n; ++c) {
      ChartPoint yp = y, ym = y;
      yp.coords[c] += h;
      ym.coords[c] -= h;
      Vec Wp = model.orbit_field(yp), Wm = model.orbit_field(ym);
      for (int r = 0; r < n; ++r) DW(r, c) = (Wp[r] - Wm[r]) / (2 * h);
    }
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) {
        double acc = 0;
        for (int k = 0; k < n; ++k) acc += DW(r, k) * s[n + c * n + k];
        ds[n + c * n + r] = acc;
      }
  };
  OdeState y;
  y.n = n + n * n;
  for (int i = 0; i < n; ++i) y[i] = p.coords[i];
  for (int c = 0; c < n; ++c) y[n + c * n + c] = 1.0;
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = 1e-12;
  double t_prev = 0;
  for (std::size_t k = 0; k < q.x.size(); ++k) {
    y = integrate_adaptive(rhs, y, t_prev, q.x[k], opt);
    t_prev = q.x[k];
    ChartPoint yp(p.chart, Vec(n));
    for (int i = 0; i < n; ++i) yp.coords[i] = y[i];
    Mat g = model.metric_components(yp);
    Mat Y(n);
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) Y(r, c) = y[n + c * n + r];
    Mat pull = transpose(Y) * g * Y;
    avg = avg + q.w[k] * pull;
  }
  return MetricTensor(avg);
}

double averaged_metric_invariance_defect(const ModelMetric& model, const ChartPoint& p) {
  // compare h at p with the pullback of h under a partial fiber flow
  int n = model.dim();
  Mat h0 = fiber_average_metric(model, p).components;
  double worst = 0;
  for (double s : {0.23, 0.61}) {
    // flow p by time s and pull h back (orbit fields from the zoo are
    // constant coefficient vectors, so the flow differential is identity)
    Vec W = model.orbit_field(p);
    ChartPoint ps = p;
    for (int i = 0; i < n; ++i) ps.coords[i] += s * W[i];
    Mat hs = fiber_average_metric(model, ps).components;
    worst = std::max(worst, tensor2_norm(model.metric_components(p), hs - h0));
  }
  return worst;
}

ONeillResult oneill_base_curvature(const ModelMetric& model, const ChartPoint& p, const Vec& u,
                                   const Vec& v) {
  if (!model.has_circle_action())
    throw ChartExceeded("oneill_base_curvature needs the model's circle action");
  int n = model.dim();
  Mat g = model.metric_components(p);

  auto vertical_unit = [&](const ChartPoint& y) {
    Vec W = model.orbit_field(y);
    double wn = metric_norm(model, y, W);
    return (1.0 / wn) * W;
  };
  auto project_h = [&](const ChartPoint& y, const Vec& a) {
    Vec V = vertical_unit(y);
    Mat gy = model.metric_components(y);
    return a - dot(gy * a, V) * V;
  };

  // orthonormal horizontal pair from the requested plane
  Vec Y0 = project_h(p, u);
  Y0 = (1.0 / metric_norm(model, p, Y0)) * Y0;
  Vec Z0 = project_h(p, v);
  Z0 -= dot(g * Z0, Y0) * Y0;
  Z0 = (1.0 / metric_norm(model, p, Z0)) * Z0;

  // horizontal extensions Y(y) = P(y) Y0, Z(y) = P(y) Z0; the vertical part
  // of their bracket at p is extension-independent
  auto Yf = [&](const ChartPoint& y) { return project_h(y, Y0); };
  auto Zf = [&](const ChartPoint& y) { return project_h(y, Z0); };
  double h = fd_step(p.coords);
  Vec bracket(n);
  for (int k = 0; k < n; ++k) {
    double acc = 0;
    for (int j = 0; j < n; ++j) {
      ChartPoint ypj = p, ymj = p;
      ypj.coords[j] += h;
      ymj.coords[j] -= h;
      double dZ = (Zf(ypj)[k] - Zf(ymj)[k]) / (2 * h);
      double dY = (Yf(ypj)[k] - Yf(ymj)[k]) / (2 * h);
      acc += Y0[j] * dZ - Z0[j] * dY;
    }
    bracket[k] = acc;
  }
  ONeillResult out;
  out.total_sectional = sectional_curvature(model, p, Y0, Z0);
  out.bracket_vertical = dot(g * bracket, vertical_unit(p));
  out.base_sectional = out.total_sectional + 0.75 * out.bracket_vertical * out.bracket_vertical;
  return out;
}

double vertical_field_derivative_norm(const ModelMetric& model, const ChartPoint& p) {
  if (!model.has_circle_action())
    throw ChartExceeded("vertical_field_derivative_norm needs a circle action");
  int n = model.dim();
  auto vertical_unit = [&](const ChartPoint& y) {
    Vec W = model.orbit_field(y);
    return (1.0 / metric_norm(model, y, W)) * W;
  };
  Ten3 gamma = christoffel_at(model, p);
  Mat g = model.metric_components(p);
  double h = fd_step(p.coords);
  Mat nablaV(n);
  Vec V0 = vertical_unit(p);
  for (int i = 0; i < n; ++i) {
    ChartPoint yp = p, ym = p;
    yp.coords[i] += h;
    ym.coords[i] -= h;
    Vec Vp = vertical_unit(yp), Vm = vertical_unit(ym);
    for (int k = 0; k < n; ++k) {
      double val = (Vp[k] - Vm[k]) / (2 * h);
      for (int j = 0; j < n; ++j) val += gamma(k, i, j) * V0[j];
      nablaV(k, i) = val;  // (nabla_i V)^k
    }
  }
  // norm with indices (k upper, i lower): g_{ka} g^{ib} ...
  Mat ginv;
  invert(g, ginv);
  double s = 0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) s += g(k, a) * ginv(i, b) * nablaV(k, i) * nablaV(a, b);
  return std::sqrt(std::max(0.0, s));
}

}  // namespace collapselab
