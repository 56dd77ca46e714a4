#ifndef COLLAPSELAB_MODEL_HPP
#define COLLAPSELAB_MODEL_HPP

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "collapselab/chart.hpp"
#include "collapselab/dual.hpp"
#include "collapselab/errors.hpp"
#include "collapselab/linalg.hpp"

namespace collapselab {

// rank-3 / rank-4 coordinate tensors at a point (dim <= 4)
struct Ten3 {
  int n = 0;
  std::array<double, 64> a{};
  explicit Ten3(int dim = 0) : n(dim) { a.fill(0.0); }
  double& operator()(int i, int j, int k) { return a[(i * 4 + j) * 4 + k]; }
  double operator()(int i, int j, int k) const { return a[(i * 4 + j) * 4 + k]; }
};

struct Ten4 {
  int n = 0;
  std::array<double, 256> a{};
  explicit Ten4(int dim = 0) : n(dim) { a.fill(0.0); }
  double& operator()(int i, int j, int k, int l) { return a[((i * 4 + j) * 4 + k) * 4 + l]; }
  double operator()(int i, int j, int k, int l) const {
    return a[((i * 4 + j) * 4 + k) * 4 + l];
  }
};

// Symmetric metric components over an arbitrary scalar type (double or dual).
template <typename S>
struct TMat {
  int n = 0;
  std::array<S, 16> a{};
  explicit TMat(int dim = 0) : n(dim) {}
  S& operator()(int i, int j) { return a[i * 4 + j]; }
  const S& operator()(int i, int j) const { return a[i * 4 + j]; }
};

struct MetricTensor {
  Mat components;
  explicit MetricTensor(Mat m = Mat()) : components(std::move(m)) {}
};

// Deck action of an exact discrete group (flat quotients). Element k acts on
// covering-chart coordinates.
class DeckAction {
public:
  virtual ~DeckAction() = default;
  virtual int dim() const = 0;
  virtual Vec apply(long k, const Vec& x) const = 0;
  virtual Mat differential(long k) const = 0;
};

// Chart-based description of one explicit manifold. Immutable after
// construction; all evaluators are const and thread-safe.
class ModelMetric {
public:
  virtual ~ModelMetric() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  virtual std::vector<ChartId> charts() const { return {primary_chart()}; }
  virtual ChartId primary_chart() const = 0;

  // Throws SingularPoint / ChartExceeded when the point is outside the
  // chart's declared validity domain. Degenerate points are rejected, never
  // extrapolated.
  virtual void check_point(const ChartPoint& p) const = 0;
  bool in_domain(const ChartPoint& p) const {
    try {
      check_point(p);
      return true;
    } catch (const LabError&) {
      return false;
    }
  }

  // Metric component evaluators at increasing jet order. All zoo models
  // derive these from one templated formula via dual numbers.
  virtual Mat metric_components(const ChartPoint& p) const = 0;
  virtual void metric_jet1(const ChartPoint& p, Mat& g, Ten3& dg) const = 0;
  virtual void metric_jet2(const ChartPoint& p, Mat& g, Ten3& dg, Ten4& ddg) const = 0;
  virtual bool has_analytic_jets() const { return true; }

  // Smooth residual measuring the failure of `end` to represent the same
  // quotient point as `base` (coordinate difference with periodic /
  // fiber-phase wrapping). Zero iff the two chart points coincide in M.
  virtual Vec quotient_residual(ChartId chart, const Vec& end, const Vec& base) const {
    (void)chart;
    Vec r(end.n);
    for (int i = 0; i < end.n; ++i) r[i] = end[i] - base[i];
    return r;
  }

  // Differential of the identification that carries frame components at a
  // loop endpoint back to the base representative (identity unless a deck
  // rotation is involved).
  virtual Mat closure_correction(ChartId chart, const Vec& end, const Vec& base) const {
    (void)chart;
    (void)end;
    (void)base;
    return Mat::identity(dim());
  }

  virtual ChartPoint distinguished_point() const = 0;
  virtual double distance_to_o(const ChartPoint& p) const = 0;

  virtual std::optional<ChartPoint> to_chart(const ChartPoint& p, ChartId target) const {
    if (p.chart == target) return p;
    return std::nullopt;
  }

  // Exact quotient distance when the model provides one (flat quotients,
  // Euclidean models).
  virtual bool has_exact_quotient_distance() const { return false; }
  virtual double quotient_distance(const ChartPoint& a, const ChartPoint& b) const {
    (void)a;
    (void)b;
    throw LabError("Unsupported", name() + " has no exact quotient distance");
  }

  // Exact deck group (flat quotients only).
  virtual const DeckAction* deck() const { return nullptr; }

  // S^1 structure, when the model carries an isometric circle action:
  // orbit length through p and the Killing field scaled so that its time-1
  // flow is the full orbit.
  virtual bool has_circle_action() const { return false; }
  virtual double orbit_length(const ChartPoint& p) const {
    (void)p;
    throw LabError("Unsupported", name() + " has no circle action");
  }
  virtual Vec orbit_field(const ChartPoint& p) const {
    (void)p;
    throw LabError("Unsupported", name() + " has no circle action");
  }
};

using ModelPtr = std::shared_ptr<const ModelMetric>;

// CRTP adapter: derive as `class Foo : public ModelBase<Foo>` and provide
//   template <typename S> TMat<S> metric_eval(ChartId, const std::array<S,4>&) const;
// the three virtual evaluators are generated from it.
template <typename Derived>
class ModelBase : public ModelMetric {
public:
  Mat metric_components(const ChartPoint& p) const override {
    self().check_point(p);
    std::array<double, 4> x{};
    for (int i = 0; i < p.dim(); ++i) x[i] = p.coords[i];
    TMat<double> m = self().template metric_eval<double>(p.chart, x);
    Mat g(p.dim());
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) g(i, j) = m(i, j);
    return g;
  }

  void metric_jet1(const ChartPoint& p, Mat& g, Ten3& dg) const override {
    self().check_point(p);
    int n = p.dim();
    std::array<Jet1, 4> x{};
    for (int i = 0; i < n; ++i) x[i] = Jet1::variable(p.coords[i], i);
    TMat<Jet1> m = self().template metric_eval<Jet1>(p.chart, x);
    g = Mat(n);
    dg = Ten3(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        g(i, j) = m(i, j).v;
        for (int k = 0; k < n; ++k) dg(k, i, j) = m(i, j).d[k];
      }
  }

  void metric_jet2(const ChartPoint& p, Mat& g, Ten3& dg, Ten4& ddg) const override {
    self().check_point(p);
    int n = p.dim();
    std::array<Jet2, 4> x{};
    for (int i = 0; i < n; ++i) x[i] = jet2_variable(p.coords[i], i);
    TMat<Jet2> m = self().template metric_eval<Jet2>(p.chart, x);
    g = Mat(n);
    dg = Ten3(n);
    ddg = Ten4(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        g(i, j) = m(i, j).v.v;
        for (int k = 0; k < n; ++k) {
          dg(k, i, j) = m(i, j).d[k].v;
          for (int l = 0; l < n; ++l) ddg(l, k, i, j) = m(i, j).d[k].d[l];
        }
      }
  }

private:
  const Derived& self() const { return *static_cast<const Derived*>(this); }
};

// JSON model construction (schema documented in the README / lab-cli).
ModelPtr model_from_json(const std::string& json_text);

}  // namespace collapselab

#endif
