#ifndef COLLAPSELAB_ASYMPTOTICS_HPP
#define COLLAPSELAB_ASYMPTOTICS_HPP

// Asymptotic diagnostics: Monte-Carlo ball volumes, log-log decay fits, the
// weighted curvature integral, injectivity-radius profiles, and the
// Diophantine side (continued fractions, pigeonhole angles).

#include <cstdint>
#include <vector>

#include "collapselab/geodesics.hpp"
#include "collapselab/model.hpp"

namespace collapselab {

struct DecayFit {
  double exponent = 0;
  double log_constant = 0;
  double residual = 0;  // RMS of the log-log fit
  double window_min = 0, window_max = 0;
  int n_points = 0;
};

// ordinary least squares on (log t, log value) within the window
DecayFit decay_fit(const std::vector<std::pair<double, double>>& pairs, double window_min,
                   double window_max);

enum class VolumeMethod { monte_carlo, product_quadrature };

struct VolumeEstimate {
  double value = 0;
  double std_error = 0;
  VolumeMethod method = VolumeMethod::monte_carlo;
  long samples = 0;
  std::uint64_t seed = 0;
};

// volume of the metric ball B(x, t). Monte Carlo samples the chart with the
// volume density; membership uses the cheapest exact distance the model
// provides (deck enumeration on quotients, the radial coordinate on
// Taub-NUT around the nut).
VolumeEstimate ball_volume(const ModelMetric& model, const ChartPoint& x, double t,
                           VolumeMethod method, long samples, std::uint64_t seed);

// Monte-Carlo estimate of int_{r_min <= r <= r_max} |Rm|^2 r dvol
VolumeEstimate weighted_curvature_integral(const ModelMetric& model, double r_min, double r_max,
                                           long samples, std::uint64_t seed);

struct InjSample {
  double r = 0;
  double inj = 0;  // infinity when no loop exists (flagged, not a large float)
  bool infinite = false;
  bool incomplete_search = false;
};

std::vector<InjSample> inj_profile(const ModelMetric& model,
                                   const std::vector<ChartPoint>& base_curve, double L_max,
                                   const GeodesicConfig& cfg = {});

struct ContinuedFraction {
  std::vector<long long> coefficients;           // a_0; a_1, a_2, ...
  std::vector<std::pair<long long, long long>> convergents;  // (p_i, q_i)
};

ContinuedFraction continued_fraction_of(double x, int depth);

// smallest k in [1, sqrt(t)] with |e^{i k theta} - 1| <= 2 pi / sqrt(t)
long long pigeonhole_k(double theta, double t);

}  // namespace collapselab

#endif
