#ifndef COLLAPSELAB_FIBRATION_HPP
#define COLLAPSELAB_FIBRATION_HPP

// The two-stage construction at a base point x: the center-of-mass
// Gromov-Hausdorff chart h (projections of lift orbits onto the hyperplane
// orthogonal to the fundamental-loop lift), the convolution-smoothed map f,
// submersion/Hessian diagnostics, fiber extraction by level-set
// continuation, and fiber-averaged metrics with the O'Neill check.

#include <memory>
#include <vector>

#include "collapselab/pseudogroup.hpp"

namespace collapselab {

// cutoff profile: 1 on [0, 1/3], 0 beyond 2/3, quintic C^2 taper between
double chi_profile(double u);
double chi_eps(double t, double eps);  // chi(2 t / eps^2)

struct GHChart {
  std::shared_ptr<LiftedBall> ball;  // pseudo-group at scale kappa r(x)
  double kappa = 0;
  double scale = 0;          // kappa * r(x)
  double lift_radius = 0;    // kappa * r(x) / 2 : window of the lift orbit
  double target_radius = 0;  // 0.1 * kappa * r(x) : ball B in H
  Mat adapted;               // orthonormal in frame coords; column d-1 || v_x

  int dim() const { return ball->center().dim(); }
  // projection onto H (drops the loop direction), H coordinates
  Vec project_H(const Vec& w_frame) const;
  Vec h_direction() const;  // frame coords of the fundamental-loop direction

  // hard-window affine center of mass over the lift orbit of w
  Vec h_of_lift(const Vec& w_frame) const;  // throws NoLifts
  // smooth-window variant used inside the convolution integrand
  Vec h_smooth(const Vec& w_frame) const;

  Vec h(const ChartPoint& y) const;  // lift by shooting, then h_of_lift
};

// kappa r(x)-scale GH chart; models without loops need an explicit direction
// for the collapsed axis (the "artificial trivial group" case).
GHChart gh_chart(const ModelMetric& model, const ChartPoint& x, double kappa,
                 const PseudoGroupOptions& opts = {});
GHChart gh_chart_trivial(const ModelMetric& model, const ChartPoint& x, double kappa,
                         const Vec& axis_chart, const PseudoGroupOptions& opts = {});

// max over sampled pairs of | d(y,z) - |h(y) - h(z)| | (exact-distance models)
double gh_pair_defect(const GHChart& chart, int n_pairs, std::uint64_t seed);

struct QuadRule {
  int cells = 3;  // subdivisions per axis
  int order = 4;  // Gauss-Legendre points per cell (4 or 6)
};

class FibrationChart {
public:
  FibrationChart(GHChart gh, double epsilon, QuadRule rule);

  const GHChart& gh() const { return gh_; }
  double epsilon() const { return epsilon_; }
  double quad_error_estimate() const { return quad_error_; }

  // smoothed map in lift coordinates and on the manifold
  Vec f_of_lift(const Vec& w_frame) const { return f_of_lift(w_frame, rule_); }
  Vec f_of_lift(const Vec& w_frame, const QuadRule& rule) const;
  Vec f(const ChartPoint& y) const;

  // differential (dim-1) x dim by central differences in lift coordinates
  Mat df_of_lift(const Vec& w_frame, const QuadRule& rule) const;
  Mat df_of_lift(const Vec& w_frame) const { return df_of_lift(w_frame, rule_); }

  // ghat-orthonormalized singular values (top dim-1) and full-df kernel data
  struct PointDiagnostics {
    std::vector<double> singular_values;  // descending, dim values
    double hessian_norm = 0;
    double kernel_angle_to_fiber = 0;  // radians; NaN when no circle action
  };
  PointDiagnostics diagnostics_at(const Vec& w_frame) const;

  QuadRule trace_rule;  // cheaper rule used by the fiber tracer

private:
  GHChart gh_;
  double epsilon_;
  QuadRule rule_;
  double quad_error_ = 0;
};

FibrationChart smooth_fibration(const GHChart& chart, double epsilon, QuadRule rule = {});

// per-point differential/Hessian reports over a set of lift points
std::vector<FibrationChart::PointDiagnostics> submersion_diagnostics(
    const FibrationChart& chart, const std::vector<Vec>& lift_points);

struct FiberRecord {
  Vec base_value;              // b in H coordinates
  std::vector<Vec> curve;      // lift-coordinate samples (frame coords)
  double length = 0;           // ghat arclength (= fiber length in M)
  double closure_defect = 0;
  double max_f_deviation = 0;  // max |f - b| along the traced curve
  double second_form_max = 0;  // curvature estimate of the fiber curve
};

// level set f^{-1}(b) traced by predictor-corrector continuation from the
// central fiber seed; throws OpenFiber when the trace fails to close
FiberRecord fiber_extract(const FibrationChart& chart, const Vec& b);

// Average of the pullbacks of g along the closed fiber flow through p,
// parameterized with period one (the flow of l * V). Uses the model's exact
// circle action; the perturbed test model shares the orbits of its parent.
MetricTensor fiber_average_metric(const ModelMetric& model, const ChartPoint& p,
                                  int quad_cells = 16);
// change of h under the fiber flow: sup |phi_s^* h - h| over a few s values
double averaged_metric_invariance_defect(const ModelMetric& model, const ChartPoint& p);

// O'Neill: Sect_base(Y^Z) = Sect(Y^Z) + (3/4) g([Y,Z], V)^2 for horizontal
// orthonormal Y, Z; also reports the bracket term alone.
struct ONeillResult {
  double base_sectional = 0;
  double total_sectional = 0;
  double bracket_vertical = 0;  // g([Y,Z], V)
};
ONeillResult oneill_base_curvature(const ModelMetric& model, const ChartPoint& p, const Vec& u,
                                   const Vec& v);

// |nabla V| of the unit vertical field of the circle action
double vertical_field_derivative_norm(const ModelMetric& model, const ChartPoint& p);

}  // namespace collapselab

#endif
