#include <algorithm>
#include <cmath>
#include <limits>

#include "collapselab/errors.hpp"
#include "collapselab/geodesics.hpp"
#include "collapselab/models/flat_family.hpp"
#include "collapselab/ode.hpp"

namespace collapselab {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct GeoRhs {
  const ModelMetric& model;
  ChartId chart;
  int n;
  void operator()(double, const OdeState& y, OdeState& d) const {
    ChartPoint p(chart, Vec(n));
    for (int i = 0; i < n; ++i) p.coords[i] = y[i];
    Ten3 gamma = christoffel_at(model, p);
    for (int i = 0; i < n; ++i) d[i] = y[n + i];
    for (int k = 0; k < n; ++k) {
      double s = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += gamma(k, i, j) * y[n + i] * y[n + j];
      d[n + k] = -s;
    }
  }
};

// geodesic + velocity sensitivity wrt initial velocity: J = dx/dv0, K = dv/dv0
struct GeoSensRhs {
  const ModelMetric& model;
  ChartId chart;
  int n;
  void operator()(double, const OdeState& y, OdeState& d) const {
    ChartPoint p(chart, Vec(n));
    for (int i = 0; i < n; ++i) p.coords[i] = y[i];
    Ten3 gamma;
    Ten4 dgamma;
    christoffel_jet(model, p, gamma, dgamma);
    const double* v = &y.y[n];
    for (int i = 0; i < n; ++i) d[i] = v[i];
    for (int k = 0; k < n; ++k) {
      double s = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += gamma(k, i, j) * v[i] * v[j];
      d[n + k] = -s;
    }
    // layout: [x (n) | v (n) | J (n*n) | K (n*n)], J/K column-major by c
    const int oJ = 2 * n, oK = 2 * n + n * n;
    for (int c = 0; c < n; ++c) {
      for (int k = 0; k < n; ++k) d[oJ + c * n + k] = y[oK + c * n + k];
      for (int k = 0; k < n; ++k) {
        double s = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) s += 2.0 * gamma(k, i, j) * v[i] * y[oK + c * n + j];
        double s2 = 0;
        for (int m = 0; m < n; ++m) {
          double gv = 0;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) gv += dgamma(m, k, i, j) * v[i] * v[j];
          s2 += gv * y[oJ + c * n + m];
        }
        d[oK + c * n + k] = -(s + s2);
      }
    }
  }
};

struct DomainObserver {
  const ModelMetric& model;
  ChartId chart;
  int n;
  bool operator()(double, const OdeState& y) const {
    ChartPoint p(chart, Vec(n));
    for (int i = 0; i < n; ++i) p.coords[i] = y[i];
    if (!model.in_domain(p)) throw LeftChartDomain("geodesic left the chart domain",
                                                   p.coords.to_std());
    return true;
  }
};

Mat residual_jacobian_wrt_end(const ModelMetric& model, ChartId chart, const Vec& end,
                              const Vec& target) {
  int n = end.n;
  Mat D(n);
  double h = 1e-6 * (1 + norm(end));
  for (int c = 0; c < n; ++c) {
    Vec ep = end, em = end;
    ep[c] += h;
    em[c] -= h;
    Vec rp = model.quotient_residual(chart, ep, target);
    Vec rm = model.quotient_residual(chart, em, target);
    for (int r = 0; r < n; ++r) D(r, c) = (rp[r] - rm[r]) / (2 * h);
  }
  return D;
}
}  // namespace

double metric_norm(const ModelMetric& model, const ChartPoint& p, const Vec& v) {
  Mat g = model.metric_components(p);
  return std::sqrt(std::max(0.0, dot(g * v, v)));
}

GeodesicPath exp_map_path(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                          const GeodesicConfig& cfg) {
  model.check_point(x);
  int n = model.dim();
  GeodesicPath path;
  path.chart = x.chart;
  path.length = metric_norm(model, x, v);

  OdeState y;
  y.n = 2 * n;
  for (int i = 0; i < n; ++i) {
    y[i] = x.coords[i];
    y[n + i] = v[i];
  }
  GeoRhs rhs{model, x.chart, n};
  DomainObserver dom{model, x.chart, n};
  path.samples.push_back({0.0, x.coords, v});
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = cfg.ode_tol;
  auto obs = [&](double s, const OdeState& st) {
    dom(s, st);
    GeodesicSample smp;
    smp.s = s;
    smp.x = Vec(n);
    smp.v = Vec(n);
    for (int i = 0; i < n; ++i) {
      smp.x[i] = st[i];
      smp.v[i] = st[n + i];
    }
    path.samples.push_back(smp);
    return true;
  };
  integrate_adaptive(rhs, y, 0.0, 1.0, opt, obs);
  return path;
}

ChartPoint exp_map(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                   const GeodesicConfig& cfg) {
  model.check_point(x);
  int n = model.dim();
  OdeState y;
  y.n = 2 * n;
  for (int i = 0; i < n; ++i) {
    y[i] = x.coords[i];
    y[n + i] = v[i];
  }
  GeoRhs rhs{model, x.chart, n};
  DomainObserver dom{model, x.chart, n};
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = cfg.ode_tol;
  y = integrate_adaptive(rhs, y, 0.0, 1.0, opt, dom);
  ChartPoint out(x.chart, Vec(n));
  for (int i = 0; i < n; ++i) out.coords[i] = y[i];
  return out;
}

void geodesic_advance(const ModelMetric& model, ChartId chart, OdeState& state, double s0,
                      double s1, const GeodesicConfig& cfg) {
  int n = model.dim();
  GeoRhs rhs{model, chart, n};
  DomainObserver dom{model, chart, n};
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = cfg.ode_tol;
  state = integrate_adaptive(rhs, state, s0, s1, opt, dom);
}

ExpJet exp_with_jacobian(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                         const GeodesicConfig& cfg) {
  model.check_point(x);
  int n = model.dim();
  OdeState y;
  y.n = 2 * n + 2 * n * n;
  for (int i = 0; i < n; ++i) {
    y[i] = x.coords[i];
    y[n + i] = v[i];
  }
  const int oK = 2 * n + n * n;
  for (int c = 0; c < n; ++c) y[oK + c * n + c] = 1.0;  // K(0) = id, J(0) = 0
  GeoSensRhs rhs{model, x.chart, n};
  DomainObserver dom{model, x.chart, n};
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = cfg.ode_tol;
  y = integrate_adaptive(rhs, y, 0.0, 1.0, opt, dom);
  ExpJet out;
  out.end = ChartPoint(x.chart, Vec(n));
  out.end_velocity = Vec(n);
  out.d_end_d_v = Mat(n);
  for (int i = 0; i < n; ++i) {
    out.end.coords[i] = y[i];
    out.end_velocity[i] = y[n + i];
  }
  const int oJ = 2 * n;
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) out.d_end_d_v(r, c) = y[oJ + c * n + r];
  return out;
}

LogResult log_map_try(const ModelMetric& model, const ChartPoint& x, const ChartPoint& y,
                      const Vec& v0, const GeodesicConfig& cfg) {
  int n = model.dim();
  Vec v = v0;
  LogResult best;
  best.residual = std::numeric_limits<double>::infinity();
  double res_norm = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.shoot_max_iter; ++it) {
    ExpJet jet;
    try {
      jet = exp_with_jacobian(model, x, v, cfg);
    } catch (const LabError&) {
      // stepped outside the chart: shrink toward the seed
      v = 0.5 * v;
      continue;
    }
    Vec res = model.quotient_residual(x.chart, jet.end.coords, y.coords);
    res_norm = norm(res);
    if (res_norm < best.residual) {
      best.residual = res_norm;
      best.v = TangentVec(x, v);
    }
    double tol = cfg.shoot_tol * std::max(1.0, norm(v));
    if (res_norm <= tol) {
      best.converged = true;
      best.v = TangentVec(x, v);
      best.residual = res_norm;
      return best;
    }
    Mat Dres = residual_jacobian_wrt_end(model, x.chart, jet.end.coords, y.coords);
    Mat Jfull = Dres * jet.d_end_d_v;
    Vec step;
    if (!solve(Jfull, res, step)) break;
    // backtracking on the residual norm
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls) {
      Vec cand = v - lambda * step;
      try {
        ChartPoint end = exp_map(model, x, cand, cfg);
        double rn = norm(model.quotient_residual(x.chart, end.coords, y.coords));
        if (rn < res_norm) {
          v = cand;
          accepted = true;
          break;
        }
      } catch (const LabError&) {
        // fall through to smaller step
      }
      lambda *= 0.5;
    }
    if (!accepted) break;
  }
  return best;
}

LogResult log_map_auto(const ModelMetric& model, const ChartPoint& x, const ChartPoint& y,
                       const GeodesicConfig& cfg) {
  // exact on flat deck models: minimize over deck images
  if (const DeckAction* deck = model.deck()) {
    double best = std::numeric_limits<double>::infinity();
    Vec vbest;
    bool tie = false;
    double dz = std::fabs(y.coords[model.dim() - 1] - x.coords[model.dim() - 1]);
    long window = long(std::ceil(dz + norm(y.coords - x.coords))) + 2;
    for (long k = -window; k <= window; ++k) {
      Vec v = deck->apply(k, y.coords) - x.coords;
      double d = norm(v);
      if (std::fabs(d - best) < 1e-9) {
        tie = true;
        // lexicographically smaller lift wins
        for (int i = 0; i < v.n; ++i) {
          if (v[i] < vbest[i] - 1e-12) {
            vbest = v;
            break;
          }
          if (v[i] > vbest[i] + 1e-12) break;
        }
      } else if (d < best) {
        best = d;
        vbest = v;
        tie = false;
      }
    }
    LogResult r;
    r.v = TangentVec(x, vbest);
    r.residual = 0;
    r.converged = true;
    r.at_cut_locus = tie;
    return r;
  }
  Vec seed = y.coords - x.coords;
  if (model.dim() == 4) {
    // wrap the periodic / fiber coordinate difference through the residual
    seed = model.quotient_residual(x.chart, y.coords, x.coords);
    if (x.chart == ChartId::bianchi) {
      // base residual is in R^3 units; rebuild a chart-coordinate seed
      seed = y.coords - x.coords;
      seed[2] = std::remainder(seed[2], 2 * kPi);
      seed[3] = std::remainder(seed[3], 4 * kPi);
    } else {
      seed = y.coords - x.coords;
      seed[3] = std::remainder(seed[3], 2 * kPi);
    }
  }
  return log_map_try(model, x, y, seed, cfg);
}

TangentVec log_map(const ModelMetric& model, const ChartPoint& x, const ChartPoint& y,
                   const Vec& v0, const GeodesicConfig& cfg) {
  LogResult r = log_map_try(model, x, y, v0, cfg);
  if (!r.converged)
    throw NoConvergence("log_map shooting did not converge", r.residual,
                        r.v.components.to_std());
  return r.v;
}

Mat parallel_transport_frame(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                             const Mat& frame, const GeodesicConfig& cfg) {
  int n = model.dim();
  OdeState y;
  y.n = 2 * n + n * n;
  for (int i = 0; i < n; ++i) {
    y[i] = x.coords[i];
    y[n + i] = v[i];
  }
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) y[2 * n + c * n + r] = frame(r, c);
  ChartId chart = x.chart;
  auto rhs = [&](double, const OdeState& s, OdeState& d) {
    ChartPoint p(chart, Vec(n));
    for (int i = 0; i < n; ++i) p.coords[i] = s[i];
    Ten3 gamma = christoffel_at(model, p);
    const double* vel = &s.y[n];
    for (int i = 0; i < n; ++i) d[i] = vel[i];
    for (int k = 0; k < n; ++k) {
      double acc = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) acc += gamma(k, i, j) * vel[i] * vel[j];
      d[n + k] = -acc;
    }
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc += gamma(k, i, j) * vel[i] * s[2 * n + c * n + j];
        d[2 * n + c * n + k] = -acc;
      }
  };
  DomainObserver dom{model, chart, n};
  OdeOptions opt;
  opt.rel_tol = opt.abs_tol = cfg.ode_tol;
  y = integrate_adaptive(rhs, y, 0.0, 1.0, opt, dom);
  Mat out(n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) out(r, c) = y[2 * n + c * n + r];
  return out;
}

Vec parallel_transport(const ModelMetric& model, const GeodesicPath& path, const Vec& w,
                       const GeodesicConfig& cfg) {
  Mat frame(model.dim());
  for (int r = 0; r < model.dim(); ++r) frame(r, 0) = w[r];
  ChartPoint x(path.chart, path.samples.front().x);
  Mat out = parallel_transport_frame(model, x, path.samples.front().v, frame, cfg);
  Vec res(model.dim());
  for (int r = 0; r < model.dim(); ++r) res[r] = out(r, 0);
  return res;
}

Vec parallel_transport_curve(const ModelMetric& model, ChartId chart,
                             const std::vector<GeodesicSample>& samples, const Vec& w,
                             int substeps) {
  int n = model.dim();
  Vec cur = w;
  for (std::size_t seg = 0; seg + 1 < samples.size(); ++seg) {
    const GeodesicSample& a = samples[seg];
    const GeodesicSample& b = samples[seg + 1];
    double ds = b.s - a.s;
    // cubic Hermite interpolation of the position, derivative for velocity
    auto pos = [&](double u, Vec& x, Vec& v) {
      double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
      double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
      double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1;
      double d01 = -6 * u * u + 6 * u, d11 = 3 * u * u - 2 * u;
      x = Vec(n);
      v = Vec(n);
      for (int i = 0; i < n; ++i) {
        x[i] = h00 * a.x[i] + h10 * ds * a.v[i] + h01 * b.x[i] + h11 * ds * b.v[i];
        v[i] = (d00 * a.x[i] + d10 * ds * a.v[i] + d01 * b.x[i] + d11 * ds * b.v[i]) / ds;
      }
    };
    auto slope = [&](double u, const Vec& wv) {
      Vec x, v;
      pos(u, x, v);
      Ten3 gamma = christoffel_at(model, ChartPoint(chart, x));
      Vec d(n);
      for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc += gamma(k, i, j) * v[i] * wv[j];
        d[k] = -acc * ds;  // d/du = ds * d/ds
      }
      return d;
    };
    double du = 1.0 / substeps;
    for (int st = 0; st < substeps; ++st) {
      double u = st * du;
      Vec k1 = slope(u, cur);
      Vec k2 = slope(u + du / 2, cur + (du / 2) * k1);
      Vec k3 = slope(u + du / 2, cur + (du / 2) * k2);
      Vec k4 = slope(u + du, cur + du * k3);
      cur += (du / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return cur;
}

Mat loop_holonomy(const ModelMetric& model, const LoopRecord& loop, const GeodesicConfig& cfg) {
  int n = model.dim();
  Mat id = Mat::identity(n);
  Mat transported =
      parallel_transport_frame(model, loop.base, loop.initial_velocity.components, id, cfg);
  ChartPoint end = exp_map(model, loop.base, loop.initial_velocity.components, cfg);
  Mat corr = model.closure_correction(loop.base.chart, end.coords, loop.base.coords);
  return corr * transported;
}

double holonomy_defect(const ModelMetric& model, const ChartPoint& x, const Mat& holonomy) {
  // spectral norm of (H - id) as an endomorphism of (T_xM, g): conjugate by
  // an orthonormal frame so the Euclidean spectral norm applies
  Mat g = model.metric_components(x);
  Mat E = orthonormal_frame(g);
  Mat Einv;
  invert(E, Einv);
  Mat D = Einv * holonomy * E - Mat::identity(g.n);
  return spectral_norm(D);
}

namespace {

std::vector<Vec> fibonacci_sphere(int count) {
  std::vector<Vec> dirs;
  const double ga = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / count;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double a = ga * i;
    dirs.push_back(Vec{r * std::cos(a), r * std::sin(a), z});
  }
  return dirs;
}

struct LoopCandidate {
  Vec v;
  double length;
  double residual;
};

// Newton refinement of (direction, length) on the closure residual.
bool refine_loop(const ModelMetric& model, const ChartPoint& x, Vec v, double& res_out,
                 Vec& v_out, const GeodesicConfig& cfg) {
  int n = model.dim();
  Mat g = model.metric_components(x);
  for (int it = 0; it < 40; ++it) {
    ExpJet jet;
    try {
      jet = exp_with_jacobian(model, x, v, cfg);
    } catch (const LabError&) {
      return false;
    }
    Vec res = model.quotient_residual(x.chart, jet.end.coords, x.coords);
    double rn = norm(res);
    if (rn <= cfg.shoot_tol * std::max(1.0, norm(v))) {
      res_out = rn;
      v_out = v;
      return true;
    }
    Mat Dres = residual_jacobian_wrt_end(model, x.chart, jet.end.coords, x.coords);
    Mat Jfull = Dres * jet.d_end_d_v;
    Vec step;
    if (!solve(Jfull, res, step)) return false;
    double lambda = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 6; ++ls) {
      Vec cand = v - lambda * step;
      try {
        ChartPoint end = exp_map(model, x, cand, cfg);
        double rn2 = norm(model.quotient_residual(x.chart, end.coords, x.coords));
        if (rn2 < rn) {
          v = cand;
          ok = true;
          break;
        }
      } catch (const LabError&) {
      }
      lambda *= 0.5;
    }
    if (!ok) return false;
  }
  return false;
}

void push_loop(const ModelMetric& model, const ChartPoint& x, const Vec& v, double residual,
               bool incomplete, long word_power, std::vector<LoopRecord>& out,
               const GeodesicConfig& cfg) {
  double len = metric_norm(model, x, v);
  if (len < 1e-9) return;  // the trivial loop
  for (const LoopRecord& r : out) {
    if (std::fabs(r.length - len) < 1e-6 * std::max(1.0, len) &&
        norm(r.initial_velocity.components - v) < 1e-5 * std::max(1.0, len))
      return;  // duplicate
  }
  LoopRecord rec;
  rec.base = x;
  rec.initial_velocity = TangentVec(x, v);
  rec.length = len;
  rec.closure_residual = residual;
  rec.incomplete_search = incomplete;
  rec.word_power = word_power;
  rec.holonomy = loop_holonomy(model, rec, cfg);
  out.push_back(rec);
}

bool loop_order(const LoopRecord& a, const LoopRecord& b) {
  if (std::fabs(a.length - b.length) > 1e-9 * std::max(1.0, a.length))
    return a.length < b.length;
  if (a.word_power != b.word_power) return a.word_power > b.word_power;
  for (int i = 0; i < a.initial_velocity.components.n; ++i) {
    double ai = a.initial_velocity.components[i], bi = b.initial_velocity.components[i];
    if (std::fabs(ai - bi) > 1e-9) return ai < bi;
  }
  return false;
}

std::vector<LoopRecord> loops_by_deck(const ModelMetric& model, const ChartPoint& x,
                                      double L_max, const GeodesicConfig& cfg) {
  const DeckAction* deck = model.deck();
  std::vector<LoopRecord> out;
  long k_cap = long(std::ceil(L_max)) + 1;
  for (long k = -k_cap; k <= k_cap; ++k) {
    if (k == 0) continue;
    Vec v = deck->apply(k, x.coords) - x.coords;
    if (norm(v) <= L_max + 1e-12)
      push_loop(model, x, v, 0.0, false, k, out, cfg);
  }
  std::sort(out.begin(), out.end(), loop_order);
  return out;
}

std::vector<LoopRecord> loops_by_shooting(const ModelMetric& model, const ChartPoint& x,
                                          double L_max, const GeodesicConfig& cfg) {
  int n = model.dim();
  Mat g = model.metric_components(x);
  std::vector<LoopRecord> out;
  std::vector<std::pair<Vec, double>> seeds;  // (unit-ish direction, length)

  if (model.has_circle_action()) {
    // fiber direction plus a 12-point perturbation cone, several iterates
    double L_fiber = model.orbit_length(x);
    Vec u = model.orbit_field(x);
    double un = metric_norm(model, x, u);
    u = (1.0 / un) * u;
    Mat E = orthonormal_frame(g);
    std::vector<Vec> cone{u, -1.0 * u};
    for (int axis = 0; axis < n - 1; ++axis)
      for (double amp : {0.15, -0.15, 0.3}) {
        Vec e(n);
        for (int r = 0; r < n; ++r) e[r] = E(r, axis);
        Vec d = u + amp * e;
        double dn = metric_norm(model, x, d);
        cone.push_back((1.0 / dn) * d);
        cone.push_back((-1.0 / dn) * d);
      }
    for (long k = 1; double(k) * L_fiber <= L_max * 1.05; ++k)
      for (const Vec& d : cone)
        for (double f : {1.0, 0.97, 1.03}) seeds.push_back({d, f * double(k) * L_fiber});
  } else {
    // blanket probe: scan directions and arclengths for close returns; flat
    // deck models get the straight-line shortcut (the geodesics are lines in
    // the covering chart), curved ones integrate
    const bool straight = model.deck() != nullptr;
    int n_dirs = (n == 3) ? (straight ? 2500 : 256) : 384;
    std::vector<Vec> dirs3 = fibonacci_sphere(n_dirs);
    Mat E = orthonormal_frame(g);
    std::vector<Vec> dirs;
    if (n == 3) {
      for (const Vec& d : dirs3) dirs.push_back(E * d);
    } else {
      // 4d: product of the 3-sphere probe with a few fourth components
      for (const Vec& d3 : dirs3)
        for (double w4 : {-0.7, 0.0, 0.7}) {
          Vec d(4);
          for (int i = 0; i < 3; ++i) d[i] = d3[i];
          d[3] = w4;
          Vec dc = E * d;
          dirs.push_back((1.0 / metric_norm(model, x, dc)) * dc);
        }
    }
    double step = 0.08;
    double thresh = straight ? 1.2 : 0.5;
    for (const Vec& d : dirs) {
      Vec dir = (1.0 / metric_norm(model, x, d)) * d;
      double prev = std::numeric_limits<double>::infinity(), prev2 = prev;
      double L = step;
      for (; L <= L_max + step; L += step) {
        double miss;
        if (straight) {
          Vec end = x.coords + L * dir;
          miss = norm(model.quotient_residual(x.chart, end, x.coords));
        } else {
          try {
            ChartPoint end = exp_map(model, x, L * dir, cfg);
            miss = norm(model.quotient_residual(x.chart, end.coords, x.coords));
          } catch (const LabError&) {
            break;
          }
        }
        if (prev < prev2 && prev < miss && prev < thresh) seeds.push_back({dir, L - step});
        prev2 = prev;
        prev = miss;
      }
    }
  }

  for (const auto& [dir, L] : seeds) {
    if (L > L_max * 1.05) continue;
    Vec v = L * dir;
    // skip seeds already inside the basin of a found loop
    bool near_known = false;
    for (const LoopRecord& r : out) {
      if (std::fabs(r.length - L) < 0.15 * std::max(1.0, L) &&
          norm(normalized(r.initial_velocity.components) - dir) < 0.05) {
        near_known = true;
        break;
      }
    }
    if (near_known) continue;
    double res;
    Vec vr;
    if (refine_loop(model, x, v, res, vr, cfg)) {
      double len = metric_norm(model, x, vr);
      if (len <= L_max * (1 + 1e-9)) {
        long word = 0;
        if (const DeckAction* deck = model.deck()) {
          // deck power from the endpoint displacement (unit pitch)
          long k = std::lround((x.coords + vr)[model.dim() - 1] - x.coords[model.dim() - 1]);
          if (norm(deck->apply(k, x.coords) - (x.coords + vr)) < 1e-6 * std::max(1.0, len))
            word = k;
        }
        push_loop(model, x, vr, res, !model.deck(), word, out, cfg);
      }
    }
  }

  // inversion closure: add the reversed orientation of every loop found
  std::vector<LoopRecord> found = out;
  for (const LoopRecord& r : found) {
    ExpJet jet = exp_with_jacobian(model, x, r.initial_velocity.components, cfg);
    Mat corr = model.closure_correction(x.chart, jet.end.coords, x.coords);
    Vec v_rev = -1.0 * (corr * jet.end_velocity);
    double res;
    Vec vr;
    if (refine_loop(model, x, v_rev, res, vr, cfg))
      push_loop(model, x, vr, res, !model.deck(), -r.word_power, out, cfg);
  }

  std::sort(out.begin(), out.end(), loop_order);
  return out;
}

}  // namespace

std::vector<LoopRecord> geodesic_loops(const ModelMetric& model, const ChartPoint& x,
                                       double L_max, LoopStrategy strategy,
                                       const GeodesicConfig& cfg) {
  model.check_point(x);
  if (strategy == LoopStrategy::automatic)
    strategy = model.deck() ? LoopStrategy::deck_enumeration : LoopStrategy::shooting;
  if (strategy == LoopStrategy::deck_enumeration) {
    if (!model.deck())
      throw IncompleteSearch("deck enumeration requested on a model without a deck group");
    return loops_by_deck(model, x, L_max, cfg);
  }
  return loops_by_shooting(model, x, L_max, cfg);
}

double distance_hessian_defect(const ModelMetric& model, const ChartPoint& x, double eps,
                               int n_samples, const GeodesicConfig& cfg_in) {
  int n = model.dim();
  Mat gx = model.metric_components(x);
  Mat E = orthonormal_frame(gx);
  // rho enters second differences: push both the shooting and ODE tolerances
  // well below the h^2 amplification so the defect signal survives
  GeodesicConfig cfg = cfg_in;
  cfg.ode_tol = std::min(cfg.ode_tol, 1e-12);
  cfg.shoot_tol = std::min(cfg.shoot_tol, 1e-12);

  // rho(y) = d(x, y)^2 / 2 through the log map, seeded by continuation
  auto rho = [&](const ChartPoint& y, const Vec& seed) {
    LogResult r = log_map_try(model, x, y, seed, cfg);
    if (!r.converged)
      throw NoConvergence("distance_hessian_defect: log did not converge", r.residual,
                          r.v.components.to_std());
    double d = metric_norm(model, x, r.v.components);
    return std::make_pair(0.5 * d * d, r.v.components);
  };

  double defect = 0;
  for (int s = 0; s < n_samples; ++s) {
    // deterministic sample directions from the frame columns, alternating signs
    Vec dir(n);
    int axis = s % n;
    double sign = (s / n) % 2 == 0 ? 1.0 : -1.0;
    for (int r = 0; r < n; ++r) dir[r] = sign * E(r, axis);
    if (s >= 2 * n) {
      // diagonal mixes once the axes are exhausted
      int a2 = (s + 1) % n;
      for (int r = 0; r < n; ++r) dir[r] = (E(r, axis) + E(r, a2)) / std::sqrt(2.0);
    }
    Vec w = (0.75 * eps) * dir;
    ChartPoint y = exp_map(model, x, w, cfg);
    Mat gy = model.metric_components(y);
    Ten3 gamma = christoffel_at(model, y);
    // difference in metric-orthonormal directions at y: chart coordinates can
    // be wildly anisotropic (the angular directions scale with the radius)
    Mat Ey = orthonormal_frame(gy);
    Mat Ey_inv;
    invert(Ey, Ey_inv);

    // step in metric units, above the shooting-noise floor of rho
    double h = std::max(0.01 * eps, 1e-5);
    auto rho_at = [&](const Vec& s_off) {
      Vec dy = Ey * s_off;
      ChartPoint yy = y;
      yy.coords += dy;
      return rho(yy, w + dy).first;
    };
    Mat hess(n);  // second differences in frame coordinates
    Vec grad_s(n);
    double r0 = rho_at(Vec(n));
    for (int i = 0; i < n; ++i) {
      Vec dp(n), dm(n);
      dp[i] = h;
      dm[i] = -h;
      double rp = rho_at(dp), rm = rho_at(dm);
      grad_s[i] = (rp - rm) / (2 * h);
      hess(i, i) = (rp - 2 * r0 + rm) / (h * h);
    }
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        Vec dpp(n), dpm(n), dmp(n), dmm(n);
        dpp[i] = h;
        dpp[j] = h;
        dpm[i] = h;
        dpm[j] = -h;
        dmp[i] = -h;
        dmp[j] = h;
        dmm[i] = -h;
        dmm[j] = -h;
        double v = (rho_at(dpp) - rho_at(dpm) - rho_at(dmp) + rho_at(dmm)) / (4 * h * h);
        hess(i, j) = v;
        hess(j, i) = v;
      }
    // covariant correction: chart gradient from the frame gradient, then the
    // connection term conjugated into the frame
    Vec grad_chart = transpose(Ey_inv) * grad_s;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double corr = 0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int k = 0; k < n; ++k)
              corr += gamma(k, a, b) * grad_chart[k] * Ey(a, i) * Ey(b, j);
        hess(i, j) -= corr;
      }
    // in frame coordinates the metric is the identity
    defect = std::max(defect, tensor2_norm(Mat::identity(n), hess - Mat::identity(n)));
  }
  return defect;
}

}  // namespace collapselab
