#include <algorithm>
#include <cmath>
#include <limits>

#include "collapselab/asymptotics.hpp"
#include "collapselab/curvature.hpp"
#include "collapselab/errors.hpp"
#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/taub_nut.hpp"
#include "collapselab/parallel.hpp"
#include "collapselab/rng.hpp"

namespace collapselab {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kBlocks = 64;  // fixed block count keeps results thread-count independent

struct McAccum {
  double sum = 0, sum_sq = 0;
  long n = 0;
};

// generic chart-box Monte Carlo: sample uniformly in a parameter box, weight
// by `density`, keep samples passing `membership`
template <typename Density, typename Member>
VolumeEstimate box_monte_carlo(const Vec& lo, const Vec& hi, int dim, long samples,
                               std::uint64_t seed, Density&& density, Member&& member) {
  double box_vol = 1;
  for (int i = 0; i < dim; ++i) box_vol *= (hi[i] - lo[i]);
  long per_block = std::max(1L, samples / kBlocks);
  auto blocks = parallel_blocks<McAccum>(kBlocks, [&](int b) {
    Rng rng(seed, std::uint64_t(b));
    McAccum acc;
    for (long i = 0; i < per_block; ++i) {
      Vec p(dim);
      for (int c = 0; c < dim; ++c) p[c] = rng.uniform(lo[c], hi[c]);
      double w = member(p) ? density(p) : 0.0;
      acc.sum += w;
      acc.sum_sq += w * w;
      acc.n += 1;
    }
    return acc;
  });
  McAccum total;
  for (const McAccum& a : blocks) {
    total.sum += a.sum;
    total.sum_sq += a.sum_sq;
    total.n += a.n;
  }
  double mean = total.sum / double(total.n);
  double var = std::max(0.0, total.sum_sq / double(total.n) - mean * mean);
  VolumeEstimate est;
  est.value = box_vol * mean;
  est.std_error = box_vol * std::sqrt(var / double(total.n));
  est.method = VolumeMethod::monte_carlo;
  est.samples = per_block * kBlocks;
  est.seed = seed;
  return est;
}
}  // namespace

DecayFit decay_fit(const std::vector<std::pair<double, double>>& pairs, double window_min,
                   double window_max) {
  std::vector<std::pair<double, double>> in;
  for (auto [t, v] : pairs) {
    if (t < window_min || t > window_max) continue;
    if (v <= 0) throw NonPositiveValue("decay_fit: value <= 0 at t=" + std::to_string(t));
    in.push_back({t, v});
  }
  if (int(in.size()) < 5)
    throw EmptyWindow("decay_fit: fewer than 5 points in the window [" +
                      std::to_string(window_min) + ", " + std::to_string(window_max) + "]");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = int(in.size());
  for (auto [t, v] : in) {
    double x = std::log(t), y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  DecayFit fit;
  fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.log_constant = (sy - fit.exponent * sx) / n;
  double ss = 0;
  for (auto [t, v] : in) {
    double e = std::log(v) - (fit.log_constant + fit.exponent * std::log(t));
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  fit.window_min = window_min;
  fit.window_max = window_max;
  fit.n_points = n;
  return fit;
}

VolumeEstimate ball_volume(const ModelMetric& model, const ChartPoint& x, double t,
                           VolumeMethod method, long samples, std::uint64_t seed) {
  if (t <= 0) throw ChartExceeded("ball_volume: radius must be positive");

  if (model.name() == "euclidean") {
    if (method == VolumeMethod::product_quadrature) {
      VolumeEstimate est;
      est.value = 4.0 / 3.0 * kPi * t * t * t;
      est.method = method;
      est.seed = seed;
      return est;
    }
    Vec lo = x.coords, hi = x.coords;
    for (int i = 0; i < 3; ++i) {
      lo[i] -= t;
      hi[i] += t;
    }
    return box_monte_carlo(
        lo, hi, 3, samples, seed, [](const Vec&) { return 1.0; },
        [&](const Vec& p) { return norm(p - x.coords) <= t; });
  }

  if (model.name() == "flat_screw" || model.name() == "euclidean_s1") {
    // sample one fundamental slab of the deck action (axis coordinate over a
    // single period, so each quotient point appears exactly once). For the
    // screw quotient the slab representative of a ball member can sit on a
    // rotated island, so the xy box is centered on the axis and covers the
    // whole circle of deck images.
    int d = model.dim();
    double period = 1.0;
    if (model.name() == "euclidean_s1")
      period = static_cast<const EuclideanS1&>(model).circumference();
    Vec lo = x.coords, hi = x.coords;
    if (model.name() == "flat_screw") {
      // slab representatives of ball members live in xy disks around the deck
      // orbit rho^{-k}(x), |k| <= t + 1/2 (the z pitch caps the useful powers)
      const auto& fs = static_cast<const FlatScrewQuotient&>(model);
      lo[0] = hi[0] = x.coords[0];
      lo[1] = hi[1] = x.coords[1];
      long k_cap = (long)std::floor(t + 0.5);
      for (long k = -k_cap; k <= k_cap; ++k) {
        Vec img = screw_apply(fs.theta(), k, x.coords);
        for (int i = 0; i < 2; ++i) {
          lo[i] = std::min(lo[i], img[i] - t);
          hi[i] = std::max(hi[i], img[i] + t);
        }
      }
    } else {
      for (int i = 0; i + 1 < d; ++i) {
        lo[i] -= t;
        hi[i] += t;
      }
    }
    lo[d - 1] = x.coords[d - 1] - period / 2;
    hi[d - 1] = x.coords[d - 1] + period / 2;
    return box_monte_carlo(
        lo, hi, d, samples, seed, [](const Vec&) { return 1.0; },
        [&](const Vec& p) {
          return model.quotient_distance(ChartPoint(x.chart, p), x) <= t;
        });
  }

  if (model.name() == "taub_nut") {
    const auto& tn = static_cast<const TaubNut&>(model);
    // balls around the nut point o only: the bianchi radial coordinate is the
    // exact distance, so the ball is the parameter region {t' <= t}
    Vec oc = tn.distinguished_point().coords;
    bool is_o = (x.chart == ChartId::bianchi && x.coords[0] <= 1e-5);
    if (!is_o && x.chart == ChartId::bianchi) is_o = norm(x.coords - oc) < 1e-9;
    if (!is_o)
      throw ChartExceeded("ball_volume on taub_nut supports the distinguished center o");
    if (t > tn.profile().t_max()) throw ChartExceeded("ball radius beyond the cached profile");
    if (method == VolumeMethod::product_quadrature) {
      // angular integral is 16 pi^2 / 8 = 2 pi^2; radial factor A^2 B by Gauss
      static const double gx[4] = {-0.8611363115940526, -0.3399810435848563,
                                   0.3399810435848563, 0.8611363115940526};
      static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                   0.3478548451374538};
      int cells = 256;
      double sum = 0;
      for (int c = 0; c < cells; ++c) {
        double a = t * double(c) / cells, b = t * double(c + 1) / cells;
        double hc = (b - a) / 2, mc = (a + b) / 2;
        for (int q = 0; q < 4; ++q) {
          double tt = mc + hc * gx[q];
          double H = tn.profile().H(tt);
          double Hp = TaubNutProfile::dH_of_H(H);
          sum += gw[q] * hc * (4 * H * H / Hp);  // A^2 B = 4 H^2 / H'
        }
      }
      VolumeEstimate est;
      est.value = 2 * kPi * kPi * sum;
      est.method = method;
      est.seed = seed;
      return est;
    }
    Vec lo{0, 0, 0, 0}, hi{t, kPi, 2 * kPi, 4 * kPi};
    auto density_at = [&](const Vec& p) {
      double H = tn.profile().H(p[0]);
      double Hp = TaubNutProfile::dH_of_H(H);
      return (4 * H * H / Hp) * std::sin(p[1]) / 8.0;  // sqrt(det g) in the chart
    };
    return box_monte_carlo(lo, hi, 4, samples, seed, density_at,
                           [](const Vec&) { return true; });
  }

  throw ChartExceeded("ball_volume: unsupported model/center combination for " + model.name());
}

VolumeEstimate weighted_curvature_integral(const ModelMetric& model, double r_min, double r_max,
                                           long samples, std::uint64_t seed) {
  if (!(0 < r_min && r_min < r_max))
    throw ChartExceeded("weighted_curvature_integral: bad annulus bounds");

  if (model.name() == "taub_nut") {
    const auto& tn = static_cast<const TaubNut&>(model);
    if (r_max > tn.profile().t_max())
      throw ChartExceeded("annulus beyond the cached profile");
    // |Rm| is spherically symmetric here, so the polar wedge exclusion is
    // compensated exactly by rescaling the angular measure
    double th_lo = 0.05, th_hi = kPi - 0.05;
    Vec lo{r_min, th_lo, 0, 0}, hi{r_max, th_hi, 2 * kPi, 4 * kPi};
    double wedge_scale = 2.0 / (std::cos(th_lo) - std::cos(th_hi));
    auto integrand = [&](const Vec& p) {
      ChartPoint cp(ChartId::bianchi, p);
      double H = tn.profile().H(p[0]);
      double Hp = TaubNutProfile::dH_of_H(H);
      double dens = (4 * H * H / Hp) * std::sin(p[1]) / 8.0;
      double rm = curvature_norm(tn, cp);
      return rm * rm * p[0] * dens * wedge_scale;
    };
    return box_monte_carlo(lo, hi, 4, samples, seed, integrand,
                           [](const Vec&) { return true; });
  }

  // flat models: |Rm| = 0 identically
  VolumeEstimate est;
  est.value = 0.0;
  est.std_error = 0.0;
  est.method = VolumeMethod::monte_carlo;
  est.samples = samples;
  est.seed = seed;
  if (model.name() == "euclidean" || model.name() == "flat_screw" ||
      model.name() == "euclidean_s1")
    return est;
  throw ChartExceeded("weighted_curvature_integral: unsupported model " + model.name());
}

std::vector<InjSample> inj_profile(const ModelMetric& model,
                                   const std::vector<ChartPoint>& base_curve, double L_max,
                                   const GeodesicConfig& cfg) {
  std::vector<InjSample> out;
  for (const ChartPoint& p : base_curve) {
    InjSample s;
    s.r = model.distance_to_o(p);
    if (model.name() == "euclidean") {
      s.inj = std::numeric_limits<double>::infinity();
      s.infinite = true;
      out.push_back(s);
      continue;
    }
    if (model.name() == "flat_screw") {
      const auto& fs = static_cast<const FlatScrewQuotient&>(model);
      double t = std::hypot(p.coords[0], p.coords[1]);
      s.inj = flat_inj(fs.theta(), t);
      out.push_back(s);
      continue;
    }
    auto loops = geodesic_loops(model, p, L_max, LoopStrategy::automatic, cfg);
    if (loops.empty()) {
      s.inj = std::numeric_limits<double>::infinity();
      s.infinite = true;
      s.incomplete_search = !model.deck();
    } else {
      s.inj = loops.front().length / 2;
      s.incomplete_search = loops.front().incomplete_search;
    }
    out.push_back(s);
  }
  return out;
}

ContinuedFraction continued_fraction_of(double x, int depth) {
  if (depth > 40) depth = 40;
  ContinuedFraction cf;
  long long p_prev = 0, q_prev = 1;  // p_{-2}, q_{-2}
  long long p_cur = 1, q_cur = 0;    // p_{-1}, q_{-1}
  double rem = x;
  for (int i = 0; i <= depth; ++i) {
    double fl = std::floor(rem);
    if (fl > 9e14 || fl < -9e14) break;  // convergents would overflow
    long long a = (long long)fl;
    __int128 p_next = (__int128)a * p_cur + p_prev;
    __int128 q_next = (__int128)a * q_cur + q_prev;
    if (p_next > (__int128)9e17 || q_next > (__int128)9e17) break;
    cf.coefficients.push_back(a);
    p_prev = p_cur;
    q_prev = q_cur;
    p_cur = (long long)p_next;
    q_cur = (long long)q_next;
    cf.convergents.push_back({p_cur, q_cur});
    double frac = rem - fl;
    if (frac < 1e-14) break;  // rational within double resolution
    rem = 1.0 / frac;
  }
  return cf;
}

long long pigeonhole_k(double theta, double t) {
  if (t < 1) throw ChartExceeded("pigeonhole_k needs t >= 1");
  long long k_max = (long long)std::floor(std::sqrt(t));
  long long best_k = 1;
  double best_gap = 2 * std::fabs(std::sin(0.5 * theta));
  for (long long k = 2; k <= k_max; ++k) {
    double gap = 2 * std::fabs(std::sin(0.5 * double(k) * theta));
    if (gap < best_gap) {
      best_gap = gap;
      best_k = k;
    }
  }
  // the pigeonhole principle guarantees best_gap <= 2 pi / sqrt(t)
  return best_k;
}

}  // namespace collapselab
