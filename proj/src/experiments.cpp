#include <chrono>
#include <cmath>

#include "collapselab/experiments.hpp"
#include "collapselab/fibration.hpp"
#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/taub_nut.hpp"
#include "collapselab/parallel.hpp"
#include "collapselab/rng.hpp"

namespace collapselab {

namespace {
constexpr double kPi = 3.14159265358979323846;
using nlohmann::json;

std::uint64_t seed_of(const json& cfg) {
  if (!cfg.contains("seed")) throw ConfigError("seed", "a seed is mandatory");
  return cfg.at("seed").get<std::uint64_t>();
}

ModelPtr model_of(const json& cfg, const char* fallback) {
  json m = cfg.value("model", json::parse(fallback));
  return model_from_json(m.dump());
}

std::vector<double> values_of(const json& params, const char* key,
                              std::vector<double> fallback) {
  if (!params.contains(key)) return fallback;
  std::vector<double> out;
  for (const auto& v : params.at(key)) out.push_back(v.get<double>());
  return out;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return g;
}

ChartPoint radial_point(const ModelMetric& model, double r) {
  if (model.name() == "taub_nut" || model.name() == "taub_nut_perturbed")
    return ChartPoint(ChartId::bianchi, Vec{r, kPi / 2, 0.4, 1.0});
  if (model.name() == "flat_screw") return ChartPoint(ChartId::cartesian, Vec{r, 0, 0});
  if (model.name() == "euclidean") return ChartPoint(ChartId::cartesian, Vec{r, 0, 0});
  if (model.name() == "euclidean_s1")
    return ChartPoint(ChartId::cartesian, Vec{r, 0, 0, 0});
  if (model.name() == "multi_taub_nut") {
    Vec dir{0.6, 0.64, 0.48};
    dir = (1.0 / norm(dir)) * dir;
    return ChartPoint(ChartId::monopole, Vec{r * dir[0], r * dir[1], r * dir[2], 0.7});
  }
  return ChartPoint(ChartId::polar, Vec{r, kPi / 2, 0.3, 0.0});
}

Report base_report(const std::string& sub, const json& cfg) {
  Report rep;
  rep.subcommand = sub;
  rep.config = cfg;
  return rep;
}

// --------------------------------------------------------------------------

Report run_inj_profile(const json& cfg) {
  Report rep = base_report("inj-profile", cfg);
  auto model = model_of(cfg, R"({"type":"flat_screw","theta_rational":[1,3]})");
  json params = cfg.value("params", json::object());
  auto ts = values_of(params, "t_values", log_grid(10, 100, 9));
  double L_factor = params.value("L_max_factor", 3.0);
  double band = params.value("pinch_band", 1.2);

  std::vector<ChartPoint> pts;
  for (double t : ts) pts.push_back(radial_point(*model, t));
  double L_max = 10.0;
  if (model->has_circle_action()) L_max = L_factor * model->orbit_length(pts.front());
  auto profile = inj_profile(*model, pts, L_max);

  std::string csv = "r,inj,infinite,incomplete\n";
  double mn = 1e300, mx = 0;
  for (const InjSample& s : profile) {
    csv += format_g17(s.r) + "," + (s.infinite ? "inf" : format_g17(s.inj)) + "," +
           (s.infinite ? "1" : "0") + "," + (s.incomplete_search ? "1" : "0") + "\n";
    rep.rows.push_back({{"r", s.r},
                        {"inj", s.infinite ? -1.0 : s.inj},
                        {"infinite", s.infinite},
                        {"incomplete_search", s.incomplete_search}});
    if (!s.infinite) {
      mn = std::min(mn, s.inj);
      mx = std::max(mx, s.inj);
    }
  }
  rep.csv_files.push_back({"inj_profile.csv", csv});

  if (model->name() == "flat_screw") {
    const auto& fs = static_cast<const FlatScrewQuotient&>(*model);
    if (fs.theta().is_rational()) {
      auto [p, q] = *fs.theta().rational;
      (void)p;
      // the plateau starts at t = q / sin(pi/q); grade only points beyond it
      double t_plateau = double(q) / std::sin(kPi / double(q));
      bool constant = true;
      int graded = 0;
      for (std::size_t i = 0; i < profile.size(); ++i) {
        double t = std::hypot(pts[i].coords[0], pts[i].coords[1]);
        if (t < t_plateau) continue;
        ++graded;
        if (std::fabs(profile[i].inj - double(q) / 2) > 0) constant = false;
      }
      if (graded > 0)
        rep.verdicts.push_back({"inj plateau == q/2 exactly (t >= q/sin(pi/q))",
                                "q/2 = " + format_g17(q / 2.0),
                                profile.empty() ? 0.0 : profile.back().inj, constant});
    }
  } else if (mx > 0) {
    rep.verdicts.push_back(
        {"inj pinching max/min", "<= " + format_g17(band), mx / mn, mx / mn <= band});
  }
  return rep;
}

Report run_volume_growth(const json& cfg) {
  Report rep = base_report("volume-growth", cfg);
  auto model = model_of(cfg, R"({"type":"taub_nut"})");
  json params = cfg.value("params", json::object());
  auto ts = values_of(params, "t_values", log_grid(10, 100, 6));
  long samples = params.value("samples", long(1) << 16);
  double nu = params.value("growth_exponent", model->dim() == 4 ? 3.0 : 2.0);
  double band = params.value("band", 3.0);
  double max_se = params.value("max_std_error_rel", 0.02);
  std::uint64_t seed = seed_of(cfg);

  ChartPoint center = model->distinguished_point();
  if (params.contains("center"))
    center = ChartPoint(center.chart, Vec::from_std(params.at("center").get<std::vector<double>>()));

  std::string csv = "t,volume,std_error\n";
  double mn = 1e300, mx = 0, worst_se = 0;
  bool monotone = true;
  double prev = -1;
  for (double t : ts) {
    VolumeEstimate est = ball_volume(*model, center, t, VolumeMethod::monte_carlo, samples,
                                     seed + std::uint64_t(t * 1000));
    csv += csv_line({t, est.value, est.std_error});
    rep.rows.push_back({{"t", t},
                        {"volume", est.value},
                        {"std_error", est.std_error},
                        {"normalized", est.value / std::pow(t, nu)}});
    mn = std::min(mn, est.value / std::pow(t, nu));
    mx = std::max(mx, est.value / std::pow(t, nu));
    worst_se = std::max(worst_se, est.std_error / est.value);
    if (est.value + 2 * est.std_error < prev) monotone = false;
    prev = est.value - 2 * est.std_error;
  }
  rep.csv_files.push_back({"volume_growth.csv", csv});
  rep.verdicts.push_back({"vol/t^nu band max/min", "<= " + format_g17(band), mx / mn,
                          mx / mn <= band});
  rep.verdicts.push_back({"monte-carlo relative std error", "<= " + format_g17(max_se),
                          worst_se, worst_se <= max_se});
  rep.verdicts.push_back({"volume monotone in t (2 sigma)", "monotone", monotone ? 1.0 : 0.0,
                          monotone});
  return rep;
}

Report run_curvature_decay(const json& cfg) {
  Report rep = base_report("curvature-decay", cfg);
  auto model = model_of(cfg, R"({"type":"taub_nut"})");
  json params = cfg.value("params", json::object());
  auto rs = values_of(params, "r_values", log_grid(10, 100, 12));
  double expected = params.value("expected_exponent", -3.0);
  double tol = params.value("exponent_tol", 0.2);
  double max_res = params.value("max_residual", 0.1);
  bool with_deriv = params.value("derivative", false);

  std::vector<std::pair<double, double>> rm_pts, drm_pts;
  std::string csv = with_deriv ? "r,rm_norm,drm_norm\n" : "r,rm_norm\n";
  for (double r : rs) {
    ChartPoint p = radial_point(*model, r);
    double rm = curvature_norm(*model, p);
    double rr = model->distance_to_o(p);
    rm_pts.push_back({rr, rm});
    if (with_deriv) {
      double drm = curvature_derivative_norm(*model, p, 1);
      drm_pts.push_back({rr, drm});
      csv += csv_line({rr, rm, drm});
      rep.rows.push_back({{"r", rr}, {"rm_norm", rm}, {"drm_norm", drm}});
    } else {
      csv += csv_line({rr, rm});
      rep.rows.push_back({{"r", rr}, {"rm_norm", rm}});
    }
  }
  rep.csv_files.push_back({"curvature_decay.csv", csv});
  DecayFit fit = decay_fit(rm_pts, rm_pts.front().first * 0.999, rm_pts.back().first * 1.001);
  rep.fits.push_back(fit_to_json(fit));
  rep.verdicts.push_back({"curvature decay exponent",
                          format_g17(expected) + " +- " + format_g17(tol), fit.exponent,
                          std::fabs(fit.exponent - expected) <= tol});
  rep.verdicts.push_back(
      {"fit residual", "<= " + format_g17(max_res), fit.residual, fit.residual <= max_res});
  if (with_deriv) {
    DecayFit dfit =
        decay_fit(drm_pts, drm_pts.front().first * 0.999, drm_pts.back().first * 1.001);
    rep.fits.push_back(fit_to_json(dfit));
    double dexp = params.value("derivative_expected_exponent", -4.0);
    double dtol = params.value("derivative_exponent_tol", 0.4);
    rep.verdicts.push_back({"curvature derivative exponent",
                            format_g17(dexp) + " +- " + format_g17(dtol), dfit.exponent,
                            std::fabs(dfit.exponent - dexp) <= dtol});
  }
  if (model->name() == "taub_nut") {
    const auto& tn = static_cast<const TaubNut&>(*model);
    std::string prof_csv = "t,H,dH\n";
    auto rows = tn.profile().grid_rows();
    for (std::size_t i = 0; i < rows.size(); i += 8)
      prof_csv += csv_line({rows[i][0], rows[i][1], rows[i][2]});
    rep.csv_files.push_back({"profile.csv", prof_csv});
  }
  return rep;
}

Report run_pseudo_group(const json& cfg) {
  Report rep = base_report("pseudo-group", cfg);
  auto model = model_of(cfg, R"({"type":"flat_screw","theta_rational":[1,3]})");
  json params = cfg.value("params", json::object());
  double r = params.value("r", 10.0);
  double rho = params.value("rho", 10.0);
  ChartPoint x = radial_point(*model, r);
  PseudoGroupOptions opts;
  opts.enforce_scale_condition = params.value("enforce_scale_condition", true);
  LiftedBall ball = build_pseudo_group(*model, x, rho, opts);

  json dump;
  dump["center_r"] = model->distance_to_o(x);
  dump["rho"] = rho;
  dump["lambda_sq"] = ball.curvature_bound_sq();
  dump["incomplete_search"] = ball.incomplete_search();
  json elems = json::array();
  for (const auto& e : ball.elements()) {
    json je;
    je["v"] = e.lift_vector.to_std();
    je["length"] = norm(e.lift_vector);
    je["word_power"] = e.word_power;
    if (!e.is_identity()) {
      json H = json::array();
      for (int i = 0; i < model->dim(); ++i) {
        json row = json::array();
        for (int j = 0; j < model->dim(); ++j) row.push_back(e.loop.holonomy(i, j));
        H.push_back(row);
      }
      je["holonomy"] = H;
    }
    elems.push_back(je);
    rep.rows.push_back(je);
  }
  dump["elements"] = elems;
  rep.json_files.push_back({"pseudo_group.json", dump});

  if (model->deck() && model->name() == "flat_screw") {
    // oracle: exact enumeration over deck powers
    const auto& fs = static_cast<const FlatScrewQuotient&>(*model);
    long expect = 1;  // identity
    long cap = long(std::ceil(rho)) + 1;
    for (long k = -cap; k <= cap; ++k) {
      if (k == 0) continue;
      if (norm(screw_apply(fs.theta(), k, x.coords) - x.coords) <= rho + 1e-12) ++expect;
    }
    rep.verdicts.push_back({"element count matches deck enumeration",
                            "count == " + std::to_string(expect),
                            double(ball.elements().size()),
                            long(ball.elements().size()) == expect});
  }
  double lam_rho = std::sqrt(ball.curvature_bound_sq()) * rho;
  rep.verdicts.push_back(
      {"curvature-scale condition Lambda rho < pi/4", "< 0.7853981633974483", lam_rho,
       lam_rho < kPi / 4});
  return rep;
}

Report run_holonomy_decay(const json& cfg) {
  Report rep = base_report("holonomy-decay", cfg);
  auto model = model_of(cfg, R"({"type":"taub_nut"})");
  json params = cfg.value("params", json::object());
  auto rs = values_of(params, "r_values", log_grid(20, 200, 8));
  double max_slope = params.value("max_slope", -1.8);
  bool export_paths = params.value("export_paths", false);

  std::vector<std::pair<double, double>> pts;
  std::string csv = "r,holonomy_defect,loop_length\n";
  for (double r : rs) {
    ChartPoint x = radial_point(*model, r);
    double L_max = model->has_circle_action() ? 1.5 * model->orbit_length(x) : 10.0;
    auto loops = geodesic_loops(*model, x, L_max, LoopStrategy::automatic);
    if (loops.empty()) continue;
    const LoopRecord& fund = loops.front();
    double defect = holonomy_defect(*model, x, fund.holonomy);
    pts.push_back({model->distance_to_o(x), defect});
    csv += csv_line({model->distance_to_o(x), defect, fund.length});
    rep.rows.push_back(
        {{"r", model->distance_to_o(x)}, {"holonomy_defect", defect}, {"loop_length", fund.length}});
    if (export_paths) {
      GeodesicPath path = exp_map_path(*model, x, fund.initial_velocity.components);
      std::string pcsv = "s";
      for (int i = 0; i < model->dim(); ++i) pcsv += ",x" + std::to_string(i);
      for (int i = 0; i < model->dim(); ++i) pcsv += ",v" + std::to_string(i);
      pcsv += "\n";
      for (const auto& s : path.samples) {
        std::vector<double> row{s.s};
        for (int i = 0; i < model->dim(); ++i) row.push_back(s.x[i]);
        for (int i = 0; i < model->dim(); ++i) row.push_back(s.v[i]);
        pcsv += csv_line(row);
      }
      rep.csv_files.push_back({"loop_r" + format_g17(r) + ".csv", pcsv});
    }
  }
  rep.csv_files.push_back({"holonomy_decay.csv", csv});
  DecayFit fit = decay_fit(pts, pts.front().first * 0.999, pts.back().first * 1.001);
  rep.fits.push_back(fit_to_json(fit));
  rep.verdicts.push_back({"holonomy decay slope", "<= " + format_g17(max_slope), fit.exponent,
                          fit.exponent <= max_slope});
  return rep;
}

Report run_gh_chart(const json& cfg) {
  Report rep = base_report("gh-chart", cfg);
  auto model = model_of(cfg, R"({"type":"flat_screw","theta_rational":[1,3]})");
  json params = cfg.value("params", json::object());
  auto rs = values_of(params, "r_values", {25, 35, 50, 70, 100});
  double kappa = params.value("kappa", 0.5);
  int n_pairs = params.value("n_pairs", 1000);
  double slope_band = params.value("slope_band", 0.2);
  std::uint64_t seed = seed_of(cfg);

  std::vector<std::pair<double, double>> pts;
  std::string csv = "r,gh_defect\n";
  for (double r : rs) {
    ChartPoint x = radial_point(*model, r);
    GHChart chart = gh_chart(*model, x, kappa);
    double defect = gh_pair_defect(chart, n_pairs, seed + std::uint64_t(r));
    pts.push_back({r, defect});
    csv += csv_line({r, defect});
    rep.rows.push_back({{"r", r}, {"gh_defect", defect}, {"kappa", kappa}});
  }
  rep.csv_files.push_back({"gh_chart.csv", csv});
  DecayFit fit = decay_fit(pts, pts.front().first * 0.999, pts.back().first * 1.001);
  rep.fits.push_back(fit_to_json(fit));
  rep.verdicts.push_back({"GH defect slope within band",
                          "|slope| <= " + format_g17(slope_band), fit.exponent,
                          std::fabs(fit.exponent) <= slope_band});
  return rep;
}

Report run_fibration(const json& cfg) {
  Report rep = base_report("fibration", cfg);
  auto model = model_of(cfg, R"({"type":"flat_screw","theta_rational":[1,3]})");
  json params = cfg.value("params", json::object());
  bool curved = !model->deck();
  auto rs = values_of(params, "r_values", curved ? std::vector<double>{50}
                                                 : std::vector<double>{25, 50, 100});
  double kappa = params.value("kappa", curved ? 0.3 : 0.5);
  double hessian_max_slope = params.value("hessian_max_slope", -1.5);
  double fiber_tol = params.value("fiber_tol_rel", curved ? 0.02 : 0.01);
  double c_max = params.value("submersion_c_max", 10.0);

  std::vector<std::pair<double, double>> hess_pts;
  double worst_c = 0;
  std::string csv = "r,sv_min,sv_max,hessian_norm,fiber_length,fiber_oracle\n";
  for (double r : rs) {
    ChartPoint x = radial_point(*model, r);
    GHChart chart = gh_chart(*model, x, kappa);
    FibrationChart fc = smooth_fibration(chart, 0.1 * kappa * model->distance_to_o(x));
    auto diag = fc.diagnostics_at(Vec(model->dim()));
    double smin = 1e300, smax = 0;
    for (int i = 0; i < model->dim() - 1; ++i) {
      smin = std::min(smin, diag.singular_values[i]);
      smax = std::max(smax, diag.singular_values[i]);
    }
    worst_c = std::max({worst_c, r * std::fabs(std::log(smin)), r * std::fabs(std::log(smax))});
    hess_pts.push_back({r, diag.hessian_norm});

    FiberRecord fiber = fiber_extract(fc, fc.f_of_lift(Vec(model->dim())));
    double oracle = model->has_circle_action()
                        ? model->orbit_length(x)
                        : double(std::labs(chart.ball->fundamental()->word_power));
    csv += csv_line({r, smin, smax, diag.hessian_norm, fiber.length, oracle});
    // fiber curve export (lift coordinates along the traced level set)
    {
      std::string fcsv = "i";
      for (int c = 0; c < model->dim(); ++c) fcsv += ",w" + std::to_string(c);
      fcsv += "\n";
      for (std::size_t i = 0; i < fiber.curve.size(); ++i) {
        std::vector<double> row{double(i)};
        for (int c = 0; c < model->dim(); ++c) row.push_back(fiber.curve[i][c]);
        fcsv += csv_line(row);
      }
      rep.csv_files.push_back({"fiber_r" + format_g17(r) + ".csv", fcsv});
    }
    rep.rows.push_back({{"r", r},
                        {"singular_values", diag.singular_values},
                        {"hessian_norm", diag.hessian_norm},
                        {"fiber_length", fiber.length},
                        {"fiber_oracle", oracle},
                        {"kernel_angle", diag.kernel_angle_to_fiber},
                        {"quad_error", fc.quad_error_estimate()}});
    rep.verdicts.push_back({"fiber length vs oracle at r=" + format_g17(r),
                            "rel err <= " + format_g17(fiber_tol),
                            std::fabs(fiber.length - oracle) / oracle,
                            std::fabs(fiber.length - oracle) / oracle <= fiber_tol});
  }
  rep.csv_files.push_back({"fibration.csv", csv});
  rep.verdicts.push_back({"submersion constant c = max r |log sv|",
                          "<= " + format_g17(c_max), worst_c, worst_c <= c_max});
  if (hess_pts.size() >= 5) {
    DecayFit fit =
        decay_fit(hess_pts, hess_pts.front().first * 0.999, hess_pts.back().first * 1.001);
    rep.fits.push_back(fit_to_json(fit));
    rep.verdicts.push_back({"hessian norm slope", "<= " + format_g17(hessian_max_slope),
                            fit.exponent, fit.exponent <= hessian_max_slope});
  }
  return rep;
}

Report run_diophantine(const json& cfg) {
  Report rep = base_report("diophantine", cfg);
  json params = cfg.value("params", json::object());
  double x = params.value("x", std::sqrt(2.0) - 1);
  int depth = params.value("depth", 20);
  ContinuedFraction cf = continued_fraction_of(x, depth);
  std::string csv = "i,a,p,q\n";
  for (std::size_t i = 0; i < cf.coefficients.size(); ++i) {
    csv += std::to_string(i) + "," + std::to_string(cf.coefficients[i]) + "," +
           std::to_string(cf.convergents[i].first) + "," +
           std::to_string(cf.convergents[i].second) + "\n";
    rep.rows.push_back({{"a", cf.coefficients[i]},
                        {"p", cf.convergents[i].first},
                        {"q", cf.convergents[i].second}});
  }
  rep.csv_files.push_back({"continued_fraction.csv", csv});
  // convergent quality |x - p/q| <= 1/(q q')
  bool quality = true;
  for (std::size_t i = 0; i + 1 < cf.convergents.size(); ++i) {
    auto [p, q] = cf.convergents[i];
    auto [p2, q2] = cf.convergents[i + 1];
    (void)p2;
    if (std::fabs(x - double(p) / double(q)) > 1.0 / (double(q) * double(q2)) + 1e-15)
      quality = false;
  }
  rep.verdicts.push_back(
      {"convergent bound |x - p/q| <= 1/(q q')", "exact", quality ? 1.0 : 0.0, quality});

  auto ts = values_of(params, "t_values", {9, 100, 1000});
  double theta = params.value("theta", 2 * kPi * x);
  for (double t : ts) {
    long long k = pigeonhole_k(theta, t);
    double gap = 2 * std::fabs(std::sin(0.5 * double(k) * theta));
    rep.rows.push_back({{"t", t}, {"pigeonhole_k", k}, {"gap", gap}});
    rep.verdicts.push_back({"pigeonhole |e^{ik theta}-1| at t=" + format_g17(t),
                            "<= 2 pi / sqrt(t) = " + format_g17(2 * kPi / std::sqrt(t)), gap,
                            gap <= 2 * kPi / std::sqrt(t) && k >= 1 &&
                                double(k) <= std::sqrt(t)});
  }
  return rep;
}

Report run_all(const json& cfg) {
  Report rep = base_report("all", cfg);
  const char* subs[] = {"inj-profile", "volume-growth", "curvature-decay",
                        "pseudo-group", "holonomy-decay", "gh-chart",
                        "fibration",   "diophantine"};
  for (const char* s : subs) {
    json sub_cfg = cfg;
    if (cfg.contains("sub_configs") && cfg.at("sub_configs").contains(s))
      sub_cfg.merge_patch(cfg.at("sub_configs").at(s));
    else {
      sub_cfg.erase("model");
      sub_cfg.erase("params");
    }
    Report r = run_experiment(s, sub_cfg);
    for (const Verdict& v : r.verdicts)
      rep.verdicts.push_back({std::string(s) + ": " + v.name, v.bound, v.value, v.pass});
    for (auto& f : r.csv_files) rep.csv_files.push_back(f);
    for (auto& f : r.json_files) rep.json_files.push_back(f);
    rep.rows.push_back({{"subcommand", s}, {"all_pass", r.all_pass()}});
  }
  return rep;
}
}  // namespace

std::vector<std::string> experiment_names() {
  return {"inj-profile", "volume-growth", "curvature-decay", "pseudo-group",
          "holonomy-decay", "gh-chart", "fibration", "diophantine", "all"};
}

Report run_experiment(const std::string& subcommand, const json& config) {
  auto t0 = std::chrono::steady_clock::now();
  if (!config.contains("seed")) throw ConfigError("seed", "a seed is mandatory");
  Report rep;
  if (subcommand == "inj-profile")
    rep = run_inj_profile(config);
  else if (subcommand == "volume-growth")
    rep = run_volume_growth(config);
  else if (subcommand == "curvature-decay")
    rep = run_curvature_decay(config);
  else if (subcommand == "pseudo-group")
    rep = run_pseudo_group(config);
  else if (subcommand == "holonomy-decay")
    rep = run_holonomy_decay(config);
  else if (subcommand == "gh-chart")
    rep = run_gh_chart(config);
  else if (subcommand == "fibration")
    rep = run_fibration(config);
  else if (subcommand == "diophantine")
    rep = run_diophantine(config);
  else if (subcommand == "all")
    rep = run_all(config);
  else
    throw ConfigError("subcommand", "unknown subcommand '" + subcommand + "'");
  rep.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace collapselab
