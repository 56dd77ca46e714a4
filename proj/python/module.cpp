// pybind11 surface of the laboratory: model construction, curvature and
// geodesic operations, volume/fit diagnostics, pseudo-group and fibration
// entry points, and the experiment drivers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "collapselab/experiments.hpp"
#include "collapselab/fibration.hpp"
#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/taub_nut.hpp"
#include "collapselab/parallel.hpp"

namespace py = pybind11;
using namespace collapselab;

namespace {

Vec vec_from(const std::vector<double>& v) { return Vec::from_std(v); }

ChartPoint point_from(const ModelMetric& model, const std::vector<double>& coords) {
  return ChartPoint(model.primary_chart(), vec_from(coords));
}

std::vector<std::vector<double>> mat_to_list(const Mat& m) {
  std::vector<std::vector<double>> out(m.n, std::vector<double>(m.n));
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) out[i][j] = m(i, j);
  return out;
}

Angle angle_from(py::object theta, py::object rational) {
  if (!rational.is_none()) {
    auto pr = rational.cast<std::pair<long long, long long>>();
    return Angle::of_rational(pr.first, pr.second);
  }
  return Angle(theta.cast<double>());
}

}  // namespace

PYBIND11_MODULE(_collapselab, m) {
  m.doc() = "numerical laboratory for collapsing model manifolds";
  m.attr("__version__") = kToolVersion;

  py::register_exception<LabError>(m, "LabError");

  py::class_<ModelMetric, std::shared_ptr<ModelMetric>>(m, "Model")
      .def_property_readonly("dim", &ModelMetric::dim)
      .def_property_readonly("name", &ModelMetric::name)
      .def("in_domain",
           [](const ModelMetric& self, const std::vector<double>& coords) {
             return self.in_domain(point_from(self, coords));
           })
      .def("metric",
           [](const ModelMetric& self, const std::vector<double>& coords) {
             return mat_to_list(self.metric_components(point_from(self, coords)));
           })
      .def("distance_to_o",
           [](const ModelMetric& self, const std::vector<double>& coords) {
             return self.distance_to_o(point_from(self, coords));
           })
      .def("orbit_length", [](const ModelMetric& self, const std::vector<double>& coords) {
        return self.orbit_length(point_from(self, coords));
      });

  m.def("make_model",
        [](const std::string& json_text) {
          return std::const_pointer_cast<ModelMetric>(model_from_json(json_text));
        },
        py::arg("json"), "construct a model from its JSON descriptor");

  m.def("set_threads", [](int n) { worker_threads() = n; });

  // model-zoo closed forms
  m.def(
      "loop_length",
      [](py::object theta, long long k, double t, py::object rational) {
        return loop_length(angle_from(theta, rational), k, t);
      },
      py::arg("theta") = py::none(), py::arg("k") = 1, py::arg("t") = 0.0,
      py::arg("rational") = py::none());
  m.def(
      "flat_inj",
      [](py::object theta, double t, py::object rational) {
        return flat_inj(angle_from(theta, rational), t);
      },
      py::arg("theta") = py::none(), py::arg("t") = 1.0, py::arg("rational") = py::none());
  m.def(
      "screw_apply",
      [](py::object theta, long long k, const std::vector<double>& p, py::object rational) {
        return screw_apply(angle_from(theta, rational), k, vec_from(p)).to_std();
      },
      py::arg("theta") = py::none(), py::arg("k") = 1,
      py::arg("p") = std::vector<double>{0, 0, 0}, py::arg("rational") = py::none());

  m.def("taub_nut_profile_rows", [](double t_max, double tol) {
    auto prof = taub_nut_profile(t_max, tol);
    return prof->grid_rows();
  });

  // curvature
  m.def("curvature_norm", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& coords) {
    return curvature_norm(*model, point_from(*model, coords));
  });
  m.def("curvature_derivative_norm",
        [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& coords, int k) {
          return curvature_derivative_norm(*model, point_from(*model, coords), k);
        });
  m.def("volume_density", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& coords) {
    return volume_density(*model, point_from(*model, coords));
  });
  m.def("ricci_norm", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& coords) {
    ChartPoint p = point_from(*model, coords);
    CurvatureTensor R = riemann_at(*model, p);
    Mat g = model->metric_components(p);
    return tensor2_norm(g, ricci_from_riemann(g, R.lowered));
  });

  // geodesics
  m.def("exp_map", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x,
                      const std::vector<double>& v) {
    return exp_map(*model, point_from(*model, x), vec_from(v)).coords.to_std();
  });
  m.def("log_map", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x,
                      const std::vector<double>& y) {
    LogResult r = log_map_auto(*model, point_from(*model, x), point_from(*model, y));
    if (!r.converged) throw NoConvergence("log_map did not converge", r.residual, {});
    return r.v.components.to_std();
  });
  m.def("geodesic_loops", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x, double L_max) {
    auto loops = geodesic_loops(*model, point_from(*model, x), L_max);
    py::list out;
    for (const auto& l : loops) {
      py::dict d;
      d["length"] = l.length;
      d["word_power"] = l.word_power;
      d["initial_velocity"] = l.initial_velocity.components.to_std();
      d["incomplete_search"] = l.incomplete_search;
      d["holonomy"] = mat_to_list(l.holonomy);
      out.append(d);
    }
    return out;
  });
  m.def("holonomy_defect", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x, double L_max) {
    ChartPoint p = point_from(*model, x);
    auto loops = geodesic_loops(*model, p, L_max);
    if (loops.empty()) throw IncompleteSearch("no loop found");
    return holonomy_defect(*model, p, loops.front().holonomy);
  });

  // asymptotics
  m.def("ball_volume", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x, double t,
                          long samples, std::uint64_t seed) {
    VolumeEstimate est = ball_volume(*model, point_from(*model, x), t,
                                     VolumeMethod::monte_carlo, samples, seed);
    py::dict d;
    d["value"] = est.value;
    d["std_error"] = est.std_error;
    d["samples"] = est.samples;
    d["seed"] = est.seed;
    return d;
  });
  m.def("decay_fit", [](const std::vector<std::pair<double, double>>& pairs, double lo,
                        double hi) {
    DecayFit fit = decay_fit(pairs, lo, hi);
    py::dict d;
    d["exponent"] = fit.exponent;
    d["log_constant"] = fit.log_constant;
    d["residual"] = fit.residual;
    d["window"] = std::make_pair(fit.window_min, fit.window_max);
    d["n_points"] = fit.n_points;
    return d;
  });
  m.def("continued_fraction", [](double x, int depth) {
    ContinuedFraction cf = continued_fraction_of(x, depth);
    py::dict d;
    d["coefficients"] = cf.coefficients;
    d["convergents"] = cf.convergents;
    return d;
  });
  m.def("pigeonhole_k", &pigeonhole_k);

  // pseudo-group and fibration diagnostics
  m.def("pseudo_group_dump", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x, double rho) {
    LiftedBall ball = build_pseudo_group(*model, point_from(*model, x), rho);
    py::list elems;
    for (const auto& e : ball.elements()) {
      py::dict d;
      d["v"] = e.lift_vector.to_std();
      d["length"] = norm(e.lift_vector);
      d["word_power"] = e.word_power;
      elems.append(d);
    }
    py::dict out;
    out["elements"] = elems;
    out["lambda_sq"] = ball.curvature_bound_sq();
    out["inj"] = ball.inj_estimate();
    out["incomplete_search"] = ball.incomplete_search();
    return out;
  });
  m.def("fiber_average_defect", [](const std::shared_ptr<ModelMetric>& model, const std::vector<double>& x) {
    ChartPoint p = point_from(*model, x);
    Mat h = fiber_average_metric(*model, p).components;
    Mat g = model->metric_components(p);
    return tensor2_norm(g, h - g);
  });

  // experiment drivers
  m.def("run_experiment", [](const std::string& sub, const std::string& config_json) {
    nlohmann::json cfg = nlohmann::json::parse(config_json);
    Report rep = run_experiment(sub, cfg);
    return rep.to_json().dump();
  });
  m.def("experiment_names", &experiment_names);
}
