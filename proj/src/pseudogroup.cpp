#include <algorithm>
#include <cmath>
#include <limits>

#include "collapselab/curvature.hpp"
#include "collapselab/errors.hpp"
#include "collapselab/parallel.hpp"
#include "collapselab/pseudogroup.hpp"
#include "collapselab/rng.hpp"

namespace collapselab {

namespace {
constexpr double kPi = 3.14159265358979323846;

// curvature bound Lambda^2 = max |Rm| sampled on B(x, 2 rho): radial probes
// toward and away from the distinguished point plus a few frame directions
double sample_curvature_bound(const ModelMetric& model, const ChartPoint& x, double rho,
                              const Mat& frame, int n_samples, const GeodesicConfig& geo) {
  double lam = 0;
  int n = model.dim();
  int per_dir = std::max(2, n_samples / (2 * n));
  for (int axis = 0; axis < n; ++axis)
    for (int sgn = -1; sgn <= 1; sgn += 2)
      for (int s = 1; s <= per_dir; ++s) {
        Vec dir(n);
        for (int r = 0; r < n; ++r) dir[r] = sgn * frame(r, axis);
        double dist = 2.0 * rho * double(s) / per_dir;
        try {
          ChartPoint p = exp_map(model, x, dist * dir, geo);
          lam = std::max(lam, curvature_norm(model, p));
        } catch (const LabError&) {
          // probes that fall off the chart (e.g. through the nut region) are
          // replaced by the center value bound below
        }
      }
  lam = std::max(lam, curvature_norm(model, x));
  return lam;
}
}  // namespace

LiftedBall::LiftedBall(const ModelMetric& model, ChartPoint x, double rho,
                       PseudoGroupOptions opts)
    : model_(&model), center_(std::move(x)), radius_(rho), opts_(std::move(opts)) {
  model.check_point(center_);
  g_center_ = model.metric_components(center_);
  frame_ = orthonormal_frame(g_center_);
  invert(frame_, frame_inv_);

  if (model.name() != "euclidean" && model.name() != "flat_screw" &&
      model.name() != "euclidean_s1") {
    lambda_sq_ = sample_curvature_bound(model, center_, rho, frame_,
                                        opts_.curvature_samples, opts_.geo);
    double lam = std::sqrt(lambda_sq_);
    if (opts_.enforce_scale_condition && lam * rho >= kPi / 4)
      throw ScaleTooLarge("Lambda * rho = " + std::to_string(lam * rho) +
                          " >= pi/4 on B(x, 2 rho)");
  }

  // enumerate the loops of length <= rho; identity element first
  PseudoGroupElement id;
  id.lift_vector = Vec(model.dim());
  elements_.push_back(id);

  auto loops = geodesic_loops(model, center_, rho, LoopStrategy::automatic, opts_.geo);
  inj_ = loops.empty() ? std::numeric_limits<double>::infinity() : loops.front().length / 2;
  for (const LoopRecord& lr : loops) {
    PseudoGroupElement e;
    e.lift_vector = chart_to_frame(lr.initial_velocity.components);
    e.word_power = lr.word_power;
    e.loop = lr;
    incomplete_ = incomplete_ || lr.incomplete_search;
    elements_.push_back(e);
  }

  // word powers for numeric models: short loops are successive lifts of the
  // fundamental loop, so match each lift vector against the iterated tips
  if (!model.deck() && elements_.size() > 1) {
    const PseudoGroupElement* fund = fundamental();
    if (fund) {
      Vec vx = fund->lift_vector;
      std::vector<std::pair<long, Vec>> tips;
      Vec tip = vx;
      tips.push_back({1, tip});
      for (long k = 2; double(k) * norm(vx) <= radius_ * 1.05; ++k) {
        tip = tau_apply(*fund, tip);
        tips.push_back({k, tip});
      }
      for (PseudoGroupElement& e : elements_) {
        if (e.is_identity()) continue;
        for (auto& [k, t] : tips) {
          if (norm(e.lift_vector - t) < 1e-4 * std::max(1.0, norm(t))) e.word_power = k;
          Vec tneg = -1.0 * t;
          if (norm(e.lift_vector - tneg) < 1e-4 * std::max(1.0, norm(t))) e.word_power = -k;
        }
      }
    }
  }

  std::sort(elements_.begin(), elements_.end(),
            [](const PseudoGroupElement& a, const PseudoGroupElement& b) {
              return norm(a.lift_vector) < norm(b.lift_vector);
            });
}

const PseudoGroupElement* LiftedBall::fundamental() const {
  // shortest nontrivial element; among the two orientations prefer the one
  // with positive last frame coordinate (lexicographic on ties) so the choice
  // is deterministic
  const PseudoGroupElement* best = nullptr;
  for (const PseudoGroupElement& e : elements_) {
    if (e.is_identity()) continue;
    if (!best) {
      best = &e;
      continue;
    }
    double ln = norm(e.lift_vector), lb = norm(best->lift_vector);
    if (ln > lb * (1 + 1e-9)) break;  // sorted by norm: group of minima done
    int d = e.lift_vector.n;
    if (e.lift_vector[d - 1] > best->lift_vector[d - 1] + 1e-12) best = &e;
  }
  return best;
}

ChartPoint LiftedBall::exp_frame(const Vec& w) const {
  return exp_map(*model_, center_, frame_to_chart(w), opts_.geo);
}

Vec LiftedBall::tau_lift_geodesic(const Vec& v_start_chart, const Vec& w_chart) const {
  // lift t -> exp_x(t w) through exp_x starting from v_start; the base ray is
  // integrated incrementally, predictor = previous lift + chart displacement,
  // corrector = shooting (log_map_try)
  int n = model_->dim();
  double len = metric_norm(*model_, center_, w_chart);
  int steps = std::max(1, int(std::ceil(len / opts_.tau_step)));
  Vec c = v_start_chart;
  OdeState ray;
  ray.n = 2 * n;
  for (int r = 0; r < n; ++r) {
    ray[r] = center_.coords[r];
    ray[n + r] = w_chart[r];
  }
  Vec prev_target = center_.coords;
  for (int i = 1; i <= steps; ++i) {
    geodesic_advance(*model_, center_.chart, ray, double(i - 1) / steps, double(i) / steps,
                     opts_.geo);
    ChartPoint target(center_.chart, Vec(n));
    for (int r = 0; r < n; ++r) target.coords[r] = ray[r];
    Vec seed = c + (target.coords - prev_target);
    LogResult lr = log_map_try(*model_, center_, target, seed, opts_.geo);
    if (!lr.converged)
      throw NoConvergence("tau_apply: lift continuation failed", lr.residual,
                          lr.v.components.to_std());
    c = lr.v.components;
    prev_target = target.coords;
  }
  return c;
}

Vec LiftedBall::tau_apply(const PseudoGroupElement& elem, const Vec& w) const {
  if (elem.is_identity()) return w;
  if (norm(w) > 2 * radius_ + 1e-9)
    throw LeftBall("tau_apply: |w| exceeds the lifted ball scale");
  if (const DeckAction* deck = model_->deck()) {
    // exact conjugated deck action
    Vec xhat = center_.coords;
    Vec p = xhat + frame_to_chart(w);
    Vec q = deck->apply(elem.word_power, p);
    return chart_to_frame(q - xhat);
  }
  if (elem.word_power != 0 && (tau_fwd_ || tau_bwd_)) {
    // powers through the cached +-1 maps when the path stays inside the cache
    long k = elem.word_power;
    Vec cur = w;
    bool ok = true;
    for (long i = 0; i < std::labs(k) && ok; ++i) {
      try {
        cur = tau_cached(k > 0 ? +1 : -1, cur);
      } catch (const LabError&) {
        ok = false;
      }
    }
    if (ok) return cur;
  }
  Vec v_chart = frame_to_chart(elem.lift_vector);
  Vec w_chart = frame_to_chart(w);
  return chart_to_frame(tau_lift_geodesic(v_chart, w_chart));
}

Vec LiftedBall::tau_power_apply(long k, const Vec& w) const {
  if (k == 0) return w;
  const PseudoGroupElement* fund = fundamental();
  if (!fund) throw IncompleteSearch("tau_power_apply: no nontrivial element");
  if (const DeckAction* deck = model_->deck()) {
    Vec xhat = center_.coords;
    Vec p = xhat + frame_to_chart(w);
    Vec q = deck->apply(k * fund->word_power, p);
    return chart_to_frame(q - xhat);
  }
  // reverse orientation: lift of the reversed loop (computed on demand)
  Vec v1 = fund->lift_vector;
  Vec v1_rev;
  bool have_rev = false;
  Vec cur = w;
  for (long i = 0; i < std::labs(k); ++i) {
    if (tau_fwd_ || tau_bwd_) {
      try {
        cur = tau_cached(k > 0 ? +1 : -1, cur);
        continue;
      } catch (const LabError&) {
      }
    }
    Vec v_start = v1;
    if (k < 0) {
      if (!have_rev) {
        ExpJet jet = exp_with_jacobian(*model_, center_, frame_to_chart(v1), opts_.geo);
        Mat corr = model_->closure_correction(center_.chart, jet.end.coords, center_.coords);
        v1_rev = chart_to_frame(-1.0 * (corr * jet.end_velocity));
        have_rev = true;
      }
      v_start = v1_rev;
    }
    Vec v_chart = frame_to_chart(v_start);
    Vec w_chart = frame_to_chart(cur);
    cur = chart_to_frame(tau_lift_geodesic(v_chart, w_chart));
  }
  return cur;
}

Mat LiftedBall::lifted_metric(const Vec& w) const {
  int n = model_->dim();
  if (model_->deck() || model_->name() == "euclidean") return Mat::identity(n);
  if (ghat_cache_ && ghat_cache_->contains(w, 1.0)) {
    auto vals = ghat_cache_->eval(w);
    Mat g(n);
    int idx = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        g(i, j) = vals[idx];
        g(j, i) = vals[idx];
        ++idx;
      }
    return g;
  }
  ExpJet jet = exp_with_jacobian(*model_, center_, frame_to_chart(w), opts_.geo);
  Mat gp = model_->metric_components(jet.end);
  Mat JE = jet.d_end_d_v * frame_;
  return transpose(JE) * gp * JE;
}

double LiftedBall::lifted_density(const Vec& w) const {
  if (model_->deck() || model_->name() == "euclidean") return 1.0;
  return std::sqrt(std::max(0.0, determinant(lifted_metric(w))));
}

double LiftedBall::lifted_distance(const Vec& a, const Vec& b) const {
  if (model_->deck() || model_->name() == "euclidean") return norm(a - b);
  if (norm(a) < 1e-14) return norm(b);
  if (norm(b) < 1e-14) return norm(a);
  // chord integral of the lifted metric: ghat-geodesics at these scales are
  // straight to O((Lambda rho)^2), second order in the deflection
  static const double gx[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                               0.8611363115940526};
  static const double gw[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                               0.3478548451374538};
  Vec d = b - a;
  double sum = 0;
  int cells = 2;
  for (int c = 0; c < cells; ++c) {
    double u0 = double(c) / cells, u1 = double(c + 1) / cells;
    double hc = (u1 - u0) / 2, mc = (u0 + u1) / 2;
    for (int q = 0; q < 4; ++q) {
      double u = mc + hc * gx[q];
      Mat g = lifted_metric(a + u * d);
      sum += gw[q] * hc * std::sqrt(std::max(0.0, dot(g * d, d)));
    }
  }
  return sum;
}

std::vector<Vec> LiftedBall::lifts_of(const Vec& w0, double r) const {
  std::vector<Vec> lifts;
  if (const DeckAction* deck = model_->deck()) {
    Vec xhat = center_.coords;
    Vec p = xhat + frame_to_chart(w0);
    long window = long(std::ceil(r + norm(w0))) + 2;
    for (long k = -window; k <= window; ++k) {
      Vec v = chart_to_frame(deck->apply(k, p) - xhat);
      if (norm(v) <= r) lifts.push_back(v);
    }
    return lifts;
  }
  if (norm(w0) <= r) lifts.push_back(w0);
  const PseudoGroupElement* fund = fundamental();
  if (!fund) return lifts;
  double step_len = norm(fund->lift_vector);
  for (int sgn = -1; sgn <= 1; sgn += 2) {
    Vec cur = w0;
    for (long k = 1;; ++k) {
      // prune before paying for a lift that cannot land inside the window
      if (norm(cur) + 0.7 * step_len > r && k > 1) break;
      if (norm(cur) - 1.3 * step_len > r) break;
      try {
        cur = tau_power_apply(sgn, cur);
      } catch (const LabError&) {
        break;
      }
      if (norm(cur) > r) break;
      lifts.push_back(cur);
      if (double(k) * inj_ > r + 1) break;
    }
  }
  return lifts;
}

void LiftedBall::build_tau_cache(const Vec& lo, const Vec& hi, double spacing) const {
  if (model_->deck() || model_->name() == "euclidean") return;  // exact already
  int n = model_->dim();
  const PseudoGroupElement* fund = fundamental();
  if (!fund) return;
  std::array<int, 4> shape{};
  for (int a = 0; a < 4; ++a) {
    double span = hi[a] - lo[a];
    shape[a] = std::max(6, int(std::ceil(span / spacing)) + 1);
  }
  Vec v1 = fund->lift_vector;
  Vec v1_rev;
  {
    ExpJet jet = exp_with_jacobian(*model_, center_, frame_to_chart(v1), opts_.geo);
    Mat corr = model_->closure_correction(center_.chart, jet.end.coords, center_.coords);
    v1_rev = chart_to_frame(-1.0 * (corr * jet.end_velocity));
  }

  auto fill = [&](const Vec& v_elem) {
    auto grid = std::make_shared<BoxGrid4>(lo, hi, shape, n);
    std::size_t total = grid->node_count();
    Vec v_chart = frame_to_chart(v_elem);
    // nodes are swept in flat order; each continuation seeds from the lift of
    // the previous node, which is one grid cell away
    std::vector<std::vector<double>> vals(total);
    parallel_for(std::size_t(worker_threads()), [&](std::size_t tid) {
      std::size_t chunk = (total + worker_threads() - 1) / worker_threads();
      std::size_t begin = tid * chunk, end = std::min(total, begin + chunk);
      Vec prev_w, prev_tau;
      bool have_prev = false;
      for (std::size_t f = begin; f < end; ++f) {
        Vec w = grid->node_coords(f);
        Vec w_chart = frame_to_chart(w);
        Vec tau_w;
        bool done = false;
        if (have_prev) {
          // corrector-only: seed from the neighbouring lift
          Vec seed = prev_tau + (w_chart - prev_w);
          ChartPoint target = exp_map(*model_, center_, w_chart, opts_.geo);
          LogResult lr = log_map_try(*model_, center_, target, seed, opts_.geo);
          if (lr.converged &&
              norm(lr.v.components - seed) < 2.0 * (norm(w_chart - prev_w) + 1e-6)) {
            tau_w = lr.v.components;
            done = true;
          }
        }
        if (!done) tau_w = tau_lift_geodesic(v_chart, w_chart);
        vals[f] = chart_to_frame(tau_w).to_std();  // frame components
        // keep chart-space seed data
        prev_w = w_chart;
        prev_tau = tau_w;
        have_prev = true;
      }
    });
    for (std::size_t f = 0; f < total; ++f) grid->set_node(f, vals[f]);
    return grid;
  };
  tau_fwd_ = fill(v1);
  tau_bwd_ = fill(v1_rev);

  // lifted-metric cache on the same box (coarser: ghat varies on the r scale)
  {
    int vdim = n * (n + 1) / 2;
    std::array<int, 4> gshape{};
    for (int a = 0; a < 4; ++a) gshape[a] = std::max(6, shape[a] / 2 + 1);
    auto grid = std::make_shared<BoxGrid4>(lo, hi, gshape, vdim);
    std::size_t total = grid->node_count();
    std::vector<std::vector<double>> vals(total);
    parallel_for(std::size_t(worker_threads()), [&](std::size_t tid) {
      std::size_t chunk = (total + worker_threads() - 1) / worker_threads();
      std::size_t begin = tid * chunk, end = std::min(total, begin + chunk);
      for (std::size_t f = begin; f < end; ++f) {
        Vec w = grid->node_coords(f);
        ExpJet jet = exp_with_jacobian(*model_, center_, frame_to_chart(w), opts_.geo);
        Mat gp = model_->metric_components(jet.end);
        Mat JE = jet.d_end_d_v * frame_;
        Mat g = transpose(JE) * gp * JE;
        std::vector<double> row;
        for (int i = 0; i < n; ++i)
          for (int j = i; j < n; ++j) row.push_back(g(i, j));
        vals[f] = row;
      }
    });
    for (std::size_t f = 0; f < total; ++f) grid->set_node(f, vals[f]);
    ghat_cache_ = grid;
  }
}

Vec LiftedBall::tau_cached(int sign, const Vec& w) const {
  const auto& grid = (sign > 0) ? tau_fwd_ : tau_bwd_;
  if (!grid || !grid->contains(w, 1.0)) throw LeftBall("outside the tau cache box");
  return Vec::from_std(grid->eval(w));
}

LiftedBall build_pseudo_group(const ModelMetric& model, const ChartPoint& x, double rho,
                              const PseudoGroupOptions& opts) {
  return LiftedBall(model, x, rho, opts);
}

LiftCount lift_count(const LiftedBall& ball, const ChartPoint& y, double rho) {
  double dxy = 0;
  Vec w0;
  if (ball.model().has_exact_quotient_distance()) {
    dxy = ball.model().quotient_distance(ball.center(), y);
  }
  LogResult lr = log_map_auto(ball.model(), ball.center(), y, ball.geo());
  if (!lr.converged) throw NoConvergence("lift_count: no lift found", lr.residual, {});
  w0 = ball.chart_to_frame(lr.v.components);
  if (!ball.model().has_exact_quotient_distance()) dxy = norm(w0);
  LiftCount out;
  out.count = long(ball.lifts_of(w0, rho).size());
  out.counting_lower_bound = (rho - dxy) / ball.inj_estimate();
  return out;
}

DomainClass fundamental_domain_classify(const LiftedBall& ball,
                                        const std::vector<const PseudoGroupElement*>& elems,
                                        const Vec& w, double rho, double tol) {
  double d0 = norm(w);
  if (d0 > rho) return DomainClass::outside;
  bool boundary = false;
  for (const PseudoGroupElement* e : elems) {
    if (e->is_identity()) continue;
    double dg = norm(ball.tau_apply(*e, w));
    if (dg < d0 - tol) return DomainClass::outside;
    if (dg < d0 + tol) boundary = true;
  }
  return boundary ? DomainClass::boundary : DomainClass::inside;
}

bool fundamental_domain_test(const LiftedBall& ball,
                             const std::vector<const PseudoGroupElement*>& elems, const Vec& w,
                             double rho) {
  return fundamental_domain_classify(ball, elems, w, rho) == DomainClass::inside;
}

DomainVolume fundamental_domain_volume(const LiftedBall& ball, double rho, long samples,
                                       std::uint64_t seed) {
  int n = ball.model().dim();
  std::vector<const PseudoGroupElement*> elems;
  for (const auto& e : ball.elements()) elems.push_back(&e);
  const int blocks = 64;
  long per_block = std::max(1L, samples / blocks);
  struct Acc {
    double sum = 0, sum_sq = 0;
    long n = 0;
  };
  auto res = parallel_blocks<Acc>(blocks, [&](int b) {
    Rng rng(seed, std::uint64_t(b));
    Acc acc;
    for (long i = 0; i < per_block; ++i) {
      Vec w = rng.in_ball(n, rho);
      DomainClass c = fundamental_domain_classify(ball, elems, w, rho);
      double val = 0;
      if (c == DomainClass::inside) val = ball.lifted_density(w);
      // boundary points are excluded from the estimate by classification
      acc.sum += val;
      acc.sum_sq += val * val;
      acc.n += 1;
    }
    return acc;
  });
  Acc total;
  for (const Acc& a : res) {
    total.sum += a.sum;
    total.sum_sq += a.sum_sq;
    total.n += a.n;
  }
  double ball_vol = (n == 3) ? 4.0 / 3.0 * kPi * rho * rho * rho
                             : kPi * kPi / 2.0 * rho * rho * rho * rho;
  double mean = total.sum / double(total.n);
  double var = std::max(0.0, total.sum_sq / double(total.n) - mean * mean);
  DomainVolume dv;
  dv.value = ball_vol * mean;
  dv.std_error = ball_vol * std::sqrt(var / double(total.n));
  dv.samples = total.n;
  dv.seed = seed;
  return dv;
}

double translation_defect(const LiftedBall& ball, const PseudoGroupElement& elem, const Vec& w) {
  if (elem.is_identity()) return 0.0;
  Vec v = elem.lift_vector;
  if (norm(w) > ball.radius() - norm(v) + 1e-9)
    throw LeftBall("translation_defect: w outside B(0, rho - |v|)");
  Vec tau_w = ball.tau_apply(elem, w);
  // p_v = parallel transport along the loop; prediction = v + p_v^{-1} w
  Mat Hinv;
  invert(elem.loop.holonomy, Hinv);
  Vec pred = v + ball.chart_to_frame(Hinv * ball.frame_to_chart(w));
  return ball.lifted_distance(tau_w, pred);
}

double loop_iterate_translation_defect(const LiftedBall& ball, long k, const Vec& w) {
  if (k == 0) return 0.0;
  const PseudoGroupElement* fund = ball.fundamental();
  if (!fund) throw IncompleteSearch("no fundamental loop");
  Vec tau_k = ball.tau_power_apply(k, w);
  Vec pred = w + double(k) * fund->lift_vector;
  return norm(tau_k - pred);
}

}  // namespace collapselab
