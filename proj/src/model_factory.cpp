#include <json.hpp>

#include "collapselab/models/flat_family.hpp"
#include "collapselab/models/multi_taub_nut.hpp"
#include "collapselab/models/schwarzschild.hpp"
#include "collapselab/models/taub_nut.hpp"

namespace collapselab {

using nlohmann::json;

namespace {
Angle angle_from_json(const json& j) {
  if (j.contains("theta_rational")) {
    auto arr = j.at("theta_rational");
    if (!arr.is_array() || arr.size() != 2)
      throw ConfigError("theta_rational", "expected [p, q]");
    return Angle::of_rational(arr[0].get<long long>(), arr[1].get<long long>());
  }
  if (j.contains("theta")) return Angle(j.at("theta").get<double>());
  throw ConfigError("theta", "flat_screw needs theta or theta_rational");
}
}  // namespace

ModelPtr model_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError("model", std::string("invalid JSON: ") + e.what());
  }
  if (!j.contains("type")) throw ConfigError("model.type", "missing");
  std::string type = j.at("type").get<std::string>();

  if (type == "euclidean") return std::make_shared<Euclidean>();
  if (type == "euclidean_s1") {
    double circ = j.value("circumference", 2 * 3.14159265358979323846);
    return std::make_shared<EuclideanS1>(circ);
  }
  if (type == "flat_screw") return std::make_shared<FlatScrewQuotient>(angle_from_json(j));
  if (type == "taub_nut") {
    double t_max = j.value("t_max", 2048.0);
    double tol = j.value("profile_tol", 1e-12);
    return std::make_shared<TaubNut>(t_max, tol);
  }
  if (type == "taub_nut_perturbed") {
    double delta = j.value("delta", 1e-3);
    double t_max = j.value("t_max", 2048.0);
    return std::make_shared<PerturbedTaubNut>(delta, t_max);
  }
  if (type == "multi_taub_nut") {
    if (!j.contains("nuts")) throw ConfigError("model.nuts", "missing");
    std::vector<Vec> nuts;
    for (const auto& n : j.at("nuts")) {
      if (!n.is_array() || n.size() != 3) throw ConfigError("model.nuts", "each nut is [x,y,z]");
      nuts.push_back(Vec{n[0].get<double>(), n[1].get<double>(), n[2].get<double>()});
    }
    return std::make_shared<MultiTaubNut>(std::move(nuts));
  }
  if (type == "schwarzschild") {
    double mass = j.value("mass", 1.0);
    return std::make_shared<Schwarzschild>(mass);
  }
  throw ConfigError("model.type", "unknown model type '" + type + "'");
}

}  // namespace collapselab
