#ifndef COLLAPSELAB_PSEUDOGROUP_HPP
#define COLLAPSELAB_PSEUDOGROUP_HPP

// The fundamental pseudo-group Gamma(x, rho) on the lifted ball
// (B(0, 2 rho) in T_xM, ghat = exp_x^* g): enumeration of the elements
// tau_v, their action by lifting geodesics, fundamental domains, lift
// counting, and the comparison of tau_v with translation-after-holonomy.
//
// Tangent data lives in an orthonormal frame of (T_xM, g_x), so g_x is the
// identity there and distances from the origin are plain Euclidean norms
// (radial lines through 0 are ghat-geodesics).

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "collapselab/geodesics.hpp"
#include "collapselab/interp.hpp"
#include "collapselab/model.hpp"

namespace collapselab {

struct PseudoGroupElement {
  Vec lift_vector;   // v = tau(0), frame coordinates; zero for the identity
  long word_power = 0;  // power of the fundamental loop (exact on deck models)
  LoopRecord loop;   // underlying oriented geodesic loop (empty for identity)
  bool is_identity() const { return norm(lift_vector) == 0.0; }
};

struct PseudoGroupOptions {
  GeodesicConfig geo{};
  int curvature_samples = 24;     // Lambda^2 sampling on B(x, 2 rho)
  bool enforce_scale_condition = true;
  double tau_step = 1.0;          // continuation step (chart-norm units)
};

class LiftedBall {
public:
  const ModelMetric& model() const { return *model_; }
  const ChartPoint& center() const { return center_; }
  double radius() const { return radius_; }
  double curvature_bound_sq() const { return lambda_sq_; }  // Lambda^2
  double inj_estimate() const { return inj_; }
  bool incomplete_search() const { return incomplete_; }
  const std::vector<PseudoGroupElement>& elements() const { return elements_; }
  const PseudoGroupElement* fundamental() const;  // shortest nontrivial, +orientation
  const GeodesicConfig& geo() const { return opts_.geo; }

  // frame <-> chart conversions for tangent vectors at the center
  Vec frame_to_chart(const Vec& w) const { return frame_ * w; }
  Vec chart_to_frame(const Vec& v) const { return frame_inv_ * v; }

  // exp_x of a frame vector
  ChartPoint exp_frame(const Vec& w) const;

  // action tau_v(w): tip of the lift from v of the geodesic t -> exp_x(t w)
  Vec tau_apply(const PseudoGroupElement& elem, const Vec& w) const;
  // k-th power of the fundamental loop applied to w (k may exceed the
  // enumerated element list; lifts are continued outward as needed)
  Vec tau_power_apply(long k, const Vec& w) const;

  // lifted metric at w in frame coordinates, and its volume density
  Mat lifted_metric(const Vec& w) const;
  double lifted_density(const Vec& w) const;

  // ghat-distance between two lifted points (|a| when b = 0)
  double lifted_distance(const Vec& a, const Vec& b) const;

  // all lifts of the point exp_frame(w0) inside B(0, r): the orbit of w0
  std::vector<Vec> lifts_of(const Vec& w0, double r) const;

  // optional interpolation caches over a box (frame coordinates), used by
  // the fibration quadratures on curved models; a no-op on deck models
  void build_tau_cache(const Vec& lo, const Vec& hi, double spacing) const;

  // construction is done through build_pseudo_group
  LiftedBall(const ModelMetric& model, ChartPoint x, double rho, PseudoGroupOptions opts);

private:
  Vec tau_lift_geodesic(const Vec& v_start_chart, const Vec& w_chart) const;
  Vec tau_cached(int sign, const Vec& w) const;  // +1 / -1 power via cache

  const ModelMetric* model_;
  ChartPoint center_;
  double radius_;
  double lambda_sq_ = 0;
  double inj_ = 0;
  bool incomplete_ = false;
  Mat frame_, frame_inv_;
  Mat g_center_;
  std::vector<PseudoGroupElement> elements_;
  PseudoGroupOptions opts_;

  // numeric caches (deck models never touch these)
  mutable std::shared_ptr<BoxGrid4> tau_fwd_, tau_bwd_, ghat_cache_;
};

LiftedBall build_pseudo_group(const ModelMetric& model, const ChartPoint& x, double rho,
                              const PseudoGroupOptions& opts = {});

struct LiftCount {
  long count = 0;
  double counting_lower_bound = 0;  // (rho - d(x,y)) / inj(x)
};
LiftCount lift_count(const LiftedBall& ball, const ChartPoint& y, double rho);

enum class DomainClass { inside, boundary, outside };

// F(x, rho, rho'): w in B(0, rho) with d(0, gamma(w)) >= d(0, w) for every
// gamma in Gamma(x, rho') (the ball is built at scale rho'). A subset of
// elements restricts to the sub-pseudo-group domain F_tau.
DomainClass fundamental_domain_classify(const LiftedBall& ball,
                                        const std::vector<const PseudoGroupElement*>& elems,
                                        const Vec& w, double rho, double tol = 1e-9);
bool fundamental_domain_test(const LiftedBall& ball,
                             const std::vector<const PseudoGroupElement*>& elems, const Vec& w,
                             double rho);

// Monte-Carlo ghat-volume of F(x, rho, rho') inside B(0, rho)
struct DomainVolume {
  double value = 0;
  double std_error = 0;
  long samples = 0;
  std::uint64_t seed = 0;
};
DomainVolume fundamental_domain_volume(const LiftedBall& ball, double rho, long samples,
                                       std::uint64_t seed);

// d(tau_v(w), v + p_v^{-1} w): the holonomy-translation approximation defect
double translation_defect(const LiftedBall& ball, const PseudoGroupElement& elem, const Vec& w);

// |tau^k(w) - w - k v_x| in the flat norm of T_xM (fundamental loop power k)
double loop_iterate_translation_defect(const LiftedBall& ball, long k, const Vec& w);

}  // namespace collapselab

#endif
