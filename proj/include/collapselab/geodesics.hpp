#ifndef COLLAPSELAB_GEODESICS_HPP
#define COLLAPSELAB_GEODESICS_HPP

// ODE-based exponential map (with forward sensitivities), log map by damped
// Newton shooting, parallel transport, geodesic-loop search, and the
// distance-Hessian comparison estimates.

#include <vector>

#include "collapselab/curvature.hpp"
#include "collapselab/model.hpp"
#include "collapselab/ode.hpp"

namespace collapselab {

struct GeodesicSample {
  double s;  // affine parameter in [0, 1]
  Vec x;
  Vec v;
};

struct GeodesicPath {
  ChartId chart{};
  std::vector<GeodesicSample> samples;
  double length = 0;  // metric length = |v0|_g (constant-speed parameterization)
};

struct GeodesicConfig {
  double ode_tol = 1e-10;      // per-step tolerance of the embedded pair
  double shoot_tol = 1e-9;     // Newton residual tolerance (chart units)
  int shoot_max_iter = 60;
};

double metric_norm(const ModelMetric& model, const ChartPoint& p, const Vec& v);

ChartPoint exp_map(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                   const GeodesicConfig& cfg = {});
GeodesicPath exp_map_path(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                          const GeodesicConfig& cfg = {});

struct ExpJet {
  ChartPoint end;
  Vec end_velocity;
  Mat d_end_d_v;  // T_v exp_x in chart coordinates
};
ExpJet exp_with_jacobian(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                         const GeodesicConfig& cfg = {});

// advance geodesic state [x | v] (layout 2*dim) from parameter s0 to s1;
// lets long rays be integrated incrementally instead of from scratch
void geodesic_advance(const ModelMetric& model, ChartId chart, OdeState& state, double s0,
                      double s1, const GeodesicConfig& cfg = {});

struct LogResult {
  TangentVec v;
  double residual = 0;
  bool converged = false;
  bool at_cut_locus = false;
};

// exp_x(v) = y by damped Newton on the quotient residual; seeded by v0.
LogResult log_map_try(const ModelMetric& model, const ChartPoint& x, const ChartPoint& y,
                      const Vec& v0, const GeodesicConfig& cfg = {});
// throwing variant (NoConvergence carries the best residual found)
TangentVec log_map(const ModelMetric& model, const ChartPoint& x, const ChartPoint& y,
                   const Vec& v0, const GeodesicConfig& cfg = {});
// convenience: chord seed (exact on flat models, with cut-locus tie-breaking)
LogResult log_map_auto(const ModelMetric& model, const ChartPoint& x, const ChartPoint& y,
                       const GeodesicConfig& cfg = {});

// Parallel transport of the columns of `frame` along the geodesic s -> exp_x(s v),
// s in [0,1]; returns components at the endpoint chart representative.
Mat parallel_transport_frame(const ModelMetric& model, const ChartPoint& x, const Vec& v,
                             const Mat& frame, const GeodesicConfig& cfg = {});
// single vector along a recorded geodesic path
Vec parallel_transport(const ModelMetric& model, const GeodesicPath& path, const Vec& w,
                       const GeodesicConfig& cfg = {});
// piecewise-Hermite transport along an arbitrary sampled curve
Vec parallel_transport_curve(const ModelMetric& model, ChartId chart,
                             const std::vector<GeodesicSample>& samples, const Vec& w,
                             int substeps = 8);

struct LoopRecord {
  ChartPoint base;
  TangentVec initial_velocity;  // affine-parameter velocity; |v|_g = length
  double length = 0;
  Mat holonomy;                 // transport once around, in base chart frame
  double closure_residual = 0;
  bool incomplete_search = false;
  long word_power = 0;  // deck power when known, 0 when unknown
};

enum class LoopStrategy { automatic, deck_enumeration, shooting };

// All geodesic loops based at x of length <= L_max (exact on flat quotients,
// best-effort shooting elsewhere; IncompleteSearch is flagged, not thrown).
std::vector<LoopRecord> geodesic_loops(const ModelMetric& model, const ChartPoint& x,
                                       double L_max, LoopStrategy strategy = LoopStrategy::automatic,
                                       const GeodesicConfig& cfg = {});

// max over sampled w of |Hess(d(x,.)^2/2) - g| on the ball B(x, eps)
double distance_hessian_defect(const ModelMetric& model, const ChartPoint& x, double eps,
                               int n_samples = 6, const GeodesicConfig& cfg = {});

// holonomy matrix of a loop (transport + closure correction), spectral |H - id|
Mat loop_holonomy(const ModelMetric& model, const LoopRecord& loop,
                  const GeodesicConfig& cfg = {});
double holonomy_defect(const ModelMetric& model, const ChartPoint& x, const Mat& holonomy);

}  // namespace collapselab

#endif
