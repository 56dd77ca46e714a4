#include <algorithm>
#include <cmath>

#include "collapselab/errors.hpp"
#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/multi_taub_nut.hpp"
#include "collapselab/models/schwarzschild.hpp"
#include "collapselab/models/taub_nut.hpp"
#include "collapselab/ode.hpp"

namespace collapselab {

namespace {
constexpr double kPi = 3.14159265358979323846;

double wrap_angle(double a) {  // to (-pi, pi]
  a = std::fmod(a, 2 * kPi);
  if (a <= -kPi) a += 2 * kPi;
  if (a > kPi) a -= 2 * kPi;
  return a;
}

long long gcd_ll(long long a, long long b) {
  while (b) {
    long long t = a % b;
    a = b;
    b = t;
  }
  return a < 0 ? -a : a;
}
}  // namespace

// ---------------------------------------------------------------------------
// Angle and the flat screw-quotient formulas
// ---------------------------------------------------------------------------

Angle Angle::of_rational(long long p, long long q) {
  if (q <= 0) throw ConfigError("theta_rational", "q must be positive");
  long long g = gcd_ll(p, q);
  if (g > 1) {
    p /= g;
    q /= g;
  }
  Angle a(2 * kPi * double(p) / double(q));
  a.rational = std::make_pair(p, q);
  return a;
}

double sin_k_half(const Angle& theta, long long k) {
  if (theta.rational) {
    // k*theta/2 = pi * (k p / q); reduce k p mod 2q exactly
    auto [p, q] = *theta.rational;
    __int128 kp = static_cast<__int128>(k) * p;
    long long m = static_cast<long long>(kp % (2 * static_cast<__int128>(q)));
    if (m < 0) m += 2 * q;
    if (m == 0 || m == q) return 0.0;
    return std::sin(kPi * double(m) / double(q));
  }
  return std::sin(0.5 * double(k) * theta.radians);
}

Vec screw_apply(const Angle& theta, long long k, const Vec& p) {
  double ang;
  if (theta.rational) {
    auto [num, den] = *theta.rational;
    __int128 kp = static_cast<__int128>(k) * num;
    long long m = static_cast<long long>(kp % static_cast<__int128>(den));
    if (m < 0) m += den;
    ang = 2 * kPi * double(m) / double(den);
  } else {
    ang = double(k) * theta.radians;
  }
  double c = std::cos(ang), s = std::sin(ang);
  Vec r(3);
  r[0] = c * p[0] - s * p[1];
  r[1] = s * p[0] + c * p[1];
  r[2] = p[2] + double(k);
  return r;
}

Mat screw_rotation(const Angle& theta, long long k) {
  double ang = double(k) * theta.radians;
  if (theta.rational) {
    auto [num, den] = *theta.rational;
    __int128 kp = static_cast<__int128>(k) * num;
    long long m = static_cast<long long>(kp % static_cast<__int128>(den));
    if (m < 0) m += den;
    ang = 2 * kPi * double(m) / double(den);
  }
  Mat r = Mat::identity(3);
  double c = std::cos(ang), s = std::sin(ang);
  r(0, 0) = c;
  r(0, 1) = -s;
  r(1, 0) = s;
  r(1, 1) = c;
  return r;
}

double loop_length(const Angle& theta, long long k, double t) {
  double sh = sin_k_half(theta, k);
  return std::sqrt(double(k) * double(k) + 4.0 * t * t * sh * sh);
}

double flat_inj(const Angle& theta, double t, long long k_max) {
  if (k_max < 1) throw KMaxTooSmall("k_max must be >= 1");
  double best = loop_length(theta, 1, t);
  for (long long k = 2; k <= k_max; ++k) best = std::min(best, loop_length(theta, k, t));
  // guarantee: l_k >= k, so no k > k_max can beat `best` once k_max >= best
  if (double(k_max) < best)
    throw KMaxTooSmall("k_max=" + std::to_string(k_max) +
                       " below the current minimum loop length " + std::to_string(best));
  return 0.5 * best;
}

double flat_inj(const Angle& theta, double t) {
  long long k_max = 64;
  for (;;) {
    double best = loop_length(theta, 1, t);
    for (long long k = 2; k <= k_max; ++k) best = std::min(best, loop_length(theta, k, t));
    if (double(k_max) >= best) return 0.5 * best;
    k_max = std::max(2 * k_max, (long long)std::ceil(best) + 1);
  }
}

void FlatScrewQuotient::check_point(const ChartPoint& p) const {
  if (p.chart != ChartId::cartesian || p.dim() != 3)
    throw ChartExceeded("flat_screw expects 3d cartesian covering-chart points");
}

Vec FlatScrewQuotient::quotient_residual(ChartId, const Vec& end, const Vec& base) const {
  // candidate deck power from the pitch-1 z translation
  long k0 = std::lround(end[2] - base[2]);
  double best = -1;
  Vec res(3);
  for (long k = k0 - 1; k <= k0 + 1; ++k) {
    Vec cand = screw_apply(theta_, -k, end) - base;
    double n = norm(cand);
    if (best < 0 || n < best) {
      best = n;
      res = cand;
    }
  }
  return res;
}

Mat FlatScrewQuotient::closure_correction(ChartId, const Vec& end, const Vec& base) const {
  long k0 = std::lround(end[2] - base[2]);
  double best = -1;
  long kbest = k0;
  for (long k = k0 - 1; k <= k0 + 1; ++k) {
    double n = norm(screw_apply(theta_, -k, end) - base);
    if (best < 0 || n < best) {
      best = n;
      kbest = k;
    }
  }
  return screw_rotation(theta_, -kbest);
}

double FlatScrewQuotient::quotient_distance(const ChartPoint& a, const ChartPoint& b) const {
  return collapselab::deck_distance(*this, a, b);
}

double deck_distance(const FlatScrewQuotient& model, const ChartPoint& x, const ChartPoint& y,
                     long k_window) {
  if (k_window < 1) throw WindowTooSmall("k_window must be >= 1");
  double best = -1;
  long kbest = 0;
  for (long k = -k_window; k <= k_window; ++k) {
    double d = norm(screw_apply(model.theta(), k, y.coords) - x.coords);
    if (best < 0 || d < best) {
      best = d;
      kbest = k;
    }
  }
  if (std::labs(kbest) == k_window && k_window > 0)
    throw WindowTooSmall("deck minimum attained at the window boundary k=" +
                         std::to_string(kbest));
  return best;
}

double deck_distance(const FlatScrewQuotient& model, const ChartPoint& x, const ChartPoint& y) {
  double dz = std::fabs(y.coords[2] - x.coords[2]);
  double dxy = norm(y.coords - x.coords);
  long window = (long)std::ceil(dz + dxy) + 2;
  return deck_distance(model, x, y, window);
}

void Euclidean::check_point(const ChartPoint& p) const {
  if (p.chart != ChartId::cartesian || p.dim() != 3)
    throw ChartExceeded("euclidean expects 3d cartesian points");
}

void EuclideanS1::check_point(const ChartPoint& p) const {
  if (p.chart != ChartId::cartesian || p.dim() != 4)
    throw ChartExceeded("euclidean_s1 expects 4d cartesian points");
}

Vec EuclideanS1::quotient_residual(ChartId, const Vec& end, const Vec& base) const {
  Vec r = end - base;
  r[3] -= circ_ * std::round(r[3] / circ_);
  return r;
}

double EuclideanS1::quotient_distance(const ChartPoint& a, const ChartPoint& b) const {
  Vec r = quotient_residual(ChartId::cartesian, a.coords, b.coords);
  return norm(r);
}

// ---------------------------------------------------------------------------
// Taub-NUT
// ---------------------------------------------------------------------------

double TaubNutProfile::t_of_H(double Hv) {
  if (Hv <= 0) return 0.0;
  double u = std::sqrt(2 * Hv);
  return 0.5 * (u * std::sqrt(2 * Hv + 1) + std::asinh(u));
}

TaubNutProfile::TaubNutProfile(double t_max, double tol) : t_max_(t_max) {
  // adaptive solve of H' = sqrt(2H/(2H+1)) with asymptotic startup H ~ t^2/2
  const double t0 = 1e-3;
  const int n_grid = 4096;
  dt_ = t_max / n_grid;
  samples_.assign(n_grid + 1, 0.0);
  samples_[0] = 0.0;

  OdeState y;
  y.n = 1;
  y[0] = t0 * t0 / 2 - std::pow(t0, 4) / 6.0;
  OdeOptions opt;
  opt.rel_tol = tol;
  opt.abs_tol = tol;
  auto rhs = [](double, const OdeState& s, OdeState& d) {
    double H = std::max(s[0], 1e-300);
    d[0] = std::sqrt(2 * H / (2 * H + 1));
  };
  double t = t0;
  for (int i = 1; i <= n_grid; ++i) {
    double ti = dt_ * i;
    if (ti <= t0) {
      samples_[i] = ti * ti / 2 - std::pow(ti, 4) / 6.0;
      continue;
    }
    y = integrate_adaptive(rhs, y, t, ti, opt);
    t = ti;
    samples_[i] = y[0];
  }
  spline_ = UniformSpline(0.0, dt_, samples_, 0.0, dH_of_H(samples_.back()));
}

double TaubNutProfile::H(double t) const {
  if (t <= 0) return 0.0;
  double h = (t < dt_) ? t * t / 2 : spline_(std::min(t, t_max_));
  if (t > t_max_) h = samples_.back() + (t - t_max_);  // H' ~ 1 tail
  // Newton polish on the closed form
  for (int it = 0; it < 4; ++it) {
    if (h <= 0) h = t * t / 2;
    double f = t_of_H(h) - t;
    double fp = std::sqrt((2 * h + 1) / (2 * h));  // dt/dH = sqrt(V)
    double step = f / fp;
    h -= step;
    if (std::fabs(step) < 1e-15 * (1 + h)) break;
  }
  return h;
}

std::vector<std::array<double, 3>> TaubNutProfile::grid_rows() const {
  std::vector<std::array<double, 3>> rows;
  rows.reserve(samples_.size());
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    double t = dt_ * double(i);
    double Hv = samples_[i];
    rows.push_back({t, Hv, Hv > 0 ? dH_of_H(Hv) : 0.0});
  }
  return rows;
}

std::shared_ptr<const TaubNutProfile> taub_nut_profile(double t_max, double tol) {
  return std::make_shared<TaubNutProfile>(t_max, tol);
}

TaubNut::TaubNut(double t_max, double tol) : profile_(taub_nut_profile(t_max, tol)) {}

void TaubNut::check_point(const ChartPoint& p) const {
  if (p.dim() != 4) throw ChartExceeded("taub_nut expects 4d points");
  if (p.chart == ChartId::bianchi) {
    double t = p.coords[0], th = p.coords[1];
    if (t <= 1e-9) throw SingularPoint("taub_nut: point at the nut (t <= 1e-9)");
    if (t < 1e-6) throw SingularPoint("taub_nut: inside the excluded nut collar");
    if (t > profile_->t_max()) throw ChartExceeded("taub_nut: t beyond the cached profile");
    if (th < 1e-6 || th > kPi - 1e-6)
      throw SingularPoint("taub_nut: Euler-angle axis excluded from the bianchi chart");
    return;
  }
  if (p.chart == ChartId::monopole) {
    double x = p.coords[0], y = p.coords[1], z = p.coords[2];
    double r = std::sqrt(x * x + y * y + z * z);
    if (r <= 1e-9) throw SingularPoint("taub_nut: point at the nut");
    if (x * x + y * y < 1e-6 && z < 0)
      throw SingularPoint("taub_nut: inside the Dirac-string tube");
    return;
  }
  throw ChartExceeded("taub_nut: unknown chart");
}

Vec TaubNut::quotient_residual(ChartId chart, const Vec& end, const Vec& base) const {
  Vec r(4);
  if (chart == ChartId::bianchi) {
    double Re = profile_->H(end[0]), Rb = profile_->H(base[0]);
    double se = std::sin(end[1]), ce = std::cos(end[1]);
    double sb = std::sin(base[1]), cb = std::cos(base[1]);
    r[0] = Re * se * std::cos(end[2]) - Rb * sb * std::cos(base[2]);
    r[1] = Re * se * std::sin(end[2]) - Rb * sb * std::sin(base[2]);
    r[2] = Re * ce - Rb * cb;
    r[3] = wrap_angle(0.5 * (end[3] + end[2]) - 0.5 * (base[3] + base[2]));
    return r;
  }
  for (int i = 0; i < 3; ++i) r[i] = end[i] - base[i];
  r[3] = wrap_angle(end[3] - base[3]);
  return r;
}

double TaubNut::distance_to_o(const ChartPoint& p) const {
  if (p.chart == ChartId::bianchi) return p.coords[0];
  double r = norm(Vec{p.coords[0], p.coords[1], p.coords[2]});
  return TaubNutProfile::t_of_H(r);
}

std::optional<ChartPoint> TaubNut::to_chart(const ChartPoint& p, ChartId target) const {
  if (p.chart == target) return p;
  if (p.chart == ChartId::bianchi && target == ChartId::monopole) {
    double R = profile_->H(p.coords[0]);
    double th = p.coords[1], ph = p.coords[2], ps = p.coords[3];
    Vec c(4);
    c[0] = R * std::sin(th) * std::cos(ph);
    c[1] = R * std::sin(th) * std::sin(ph);
    c[2] = R * std::cos(th);
    c[3] = 0.5 * (ps + ph);
    return ChartPoint(ChartId::monopole, c);
  }
  if (p.chart == ChartId::monopole && target == ChartId::bianchi) {
    double x = p.coords[0], y = p.coords[1], z = p.coords[2];
    double R = std::sqrt(x * x + y * y + z * z);
    Vec c(4);
    c[0] = TaubNutProfile::t_of_H(R);
    c[1] = std::acos(z / R);
    c[2] = std::atan2(y, x);
    c[3] = 2 * p.coords[3] - c[2];
    return ChartPoint(ChartId::bianchi, c);
  }
  return std::nullopt;
}

double TaubNut::orbit_length(const ChartPoint& p) const {
  double R = (p.chart == ChartId::bianchi) ? profile_->H(p.coords[0])
                                           : norm(Vec{p.coords[0], p.coords[1], p.coords[2]});
  double V = 1.0 + 0.5 / R;
  return 2 * kPi / std::sqrt(V);
}

Vec TaubNut::orbit_field(const ChartPoint& p) const {
  if (p.chart == ChartId::bianchi) return Vec{0, 0, 0, 4 * kPi};
  return Vec{0, 0, 0, 2 * kPi};
}

PerturbedTaubNut::PerturbedTaubNut(double delta, double t_max, double tol)
    : delta_(delta), profile_(taub_nut_profile(t_max, tol)) {}

void PerturbedTaubNut::check_point(const ChartPoint& p) const {
  if (p.chart != ChartId::bianchi || p.dim() != 4)
    throw ChartExceeded("taub_nut_perturbed lives on the bianchi chart");
  double t = p.coords[0], th = p.coords[1];
  if (t <= 1e-9) throw SingularPoint("taub_nut_perturbed: point at the nut");
  if (t < 1e-6) throw SingularPoint("taub_nut_perturbed: inside the excluded nut collar");
  if (t > profile_->t_max()) throw ChartExceeded("taub_nut_perturbed: t beyond cached profile");
  if (th < 1e-6 || th > kPi - 1e-6)
    throw SingularPoint("taub_nut_perturbed: Euler-angle axis excluded");
}

Vec PerturbedTaubNut::quotient_residual(ChartId, const Vec& end, const Vec& base) const {
  Vec r(4);
  double Re = profile_->H(end[0]), Rb = profile_->H(base[0]);
  double se = std::sin(end[1]), ce = std::cos(end[1]);
  double sb = std::sin(base[1]), cb = std::cos(base[1]);
  r[0] = Re * se * std::cos(end[2]) - Rb * sb * std::cos(base[2]);
  r[1] = Re * se * std::sin(end[2]) - Rb * sb * std::sin(base[2]);
  r[2] = Re * ce - Rb * cb;
  r[3] = wrap_angle(0.5 * (end[3] + end[2]) - 0.5 * (base[3] + base[2]));
  return r;
}

double PerturbedTaubNut::orbit_length(const ChartPoint& p) const {
  double R = profile_->H(p.coords[0]);
  double V = 1.0 + 0.5 / R;
  return 2 * kPi / std::sqrt(V);
}

// ---------------------------------------------------------------------------
// Multi-Taub-NUT
// ---------------------------------------------------------------------------

MultiTaubNut::MultiTaubNut(std::vector<Vec> nuts) : nuts_(std::move(nuts)) {
  if (nuts_.empty()) throw ConfigError("nuts", "multi_taub_nut needs at least one nut");
  double zc = 0;
  for (const Vec& p : nuts_) zc += p[2];
  zc /= double(nuts_.size());
  for (const Vec& p : nuts_) string_sign_.push_back(p[2] >= zc ? -1.0 : 1.0);
  Vec c(4);
  for (const Vec& p : nuts_)
    for (int i = 0; i < 3; ++i) c[i] += p[i] / double(nuts_.size());
  c[3] = 0.0;
  o_ = ChartPoint(ChartId::monopole, c);
}

void MultiTaubNut::check_point(const ChartPoint& p) const {
  if (p.chart != ChartId::monopole || p.dim() != 4)
    throw ChartExceeded("multi_taub_nut lives on the monopole chart");
  for (std::size_t i = 0; i < nuts_.size(); ++i) {
    Vec d(3);
    for (int k = 0; k < 3; ++k) d[k] = p.coords[k] - nuts_[i][k];
    double r = norm(d);
    if (r <= 1e-9) throw SingularPoint("multi_taub_nut: point at a nut");
    bool on_string_side = (string_sign_[i] > 0) ? (d[2] < 0) : (d[2] > 0);
    if (d[0] * d[0] + d[1] * d[1] < 1e-6 && on_string_side)
      throw SingularPoint("multi_taub_nut: inside a Dirac-string tube");
  }
}

Vec MultiTaubNut::quotient_residual(ChartId, const Vec& end, const Vec& base) const {
  Vec r(4);
  for (int i = 0; i < 3; ++i) r[i] = end[i] - base[i];
  r[3] = wrap_angle(end[3] - base[3]);
  return r;
}

double MultiTaubNut::potential(const Vec& xyz) const {
  double V = 1.0;
  for (const Vec& p : nuts_) {
    Vec d(3);
    for (int k = 0; k < 3; ++k) d[k] = xyz[k] - p[k];
    V += 0.5 / norm(d);
  }
  return V;
}

double MultiTaubNut::distance_to_o(const ChartPoint& p) const {
  // quadrature of sqrt(V) along the Euclidean ray from the nut centroid
  Vec a{o_.coords[0], o_.coords[1], o_.coords[2]};
  Vec b{p.coords[0], p.coords[1], p.coords[2]};
  Vec d = b - a;
  double len = norm(d);
  if (len < 1e-14) return 0.0;
  // composite Gauss-Legendre (4 nodes per cell)
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374538};
  int cells = 64;
  double sum = 0;
  for (int c = 0; c < cells; ++c) {
    double s0 = len * c / cells, s1 = len * (c + 1) / cells;
    double hc = 0.5 * (s1 - s0), mc = 0.5 * (s0 + s1);
    for (int q = 0; q < 4; ++q) {
      double s = mc + hc * gx[q];
      Vec x = a + (s / len) * d;
      sum += gw[q] * hc * std::sqrt(potential(x));
    }
  }
  return sum;
}

double MultiTaubNut::orbit_length(const ChartPoint& p) const {
  Vec xyz{p.coords[0], p.coords[1], p.coords[2]};
  return 2 * kPi / std::sqrt(potential(xyz));
}

// ---------------------------------------------------------------------------
// Schwarzschild
// ---------------------------------------------------------------------------

void Schwarzschild::check_point(const ChartPoint& p) const {
  if (p.chart != ChartId::polar || p.dim() != 4)
    throw ChartExceeded("schwarzschild lives on the polar chart");
  double R = p.coords[0], th = p.coords[1];
  if (R <= 2 * m_ * (1 + 1e-9)) throw SingularPoint("schwarzschild: at or inside the horizon");
  if (th < 1e-6 || th > kPi - 1e-6) throw SingularPoint("schwarzschild: polar axis excluded");
}

Vec Schwarzschild::quotient_residual(ChartId, const Vec& end, const Vec& base) const {
  Vec r = end - base;
  double period = 8 * kPi * m_;
  r[3] -= period * std::round(r[3] / period);
  return r;
}

double Schwarzschild::distance_to_o(const ChartPoint& p) const {
  // radial proper distance from the horizon
  double R = p.coords[0];
  double u = std::sqrt(R * (R - 2 * m_));
  return u + 2 * m_ * std::log((std::sqrt(R) + std::sqrt(R - 2 * m_)) / std::sqrt(2 * m_));
}

}  // namespace collapselab
