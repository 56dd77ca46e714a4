#include <cstdio>
#include <filesystem>
#include <fstream>

#include "collapselab/errors.hpp"
#include "collapselab/report.hpp"

namespace collapselab {

bool Report::all_pass() const {
  for (const Verdict& v : verdicts)
    if (!v.pass) return false;
  return true;
}

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["subcommand"] = subcommand;
  j["config"] = config;
  j["rows"] = rows;
  j["fits"] = fits;
  nlohmann::json vs = nlohmann::json::array();
  for (const Verdict& v : verdicts)
    vs.push_back({{"name", v.name}, {"bound", v.bound}, {"value", v.value}, {"pass", v.pass}});
  j["verdicts"] = vs;
  j["wall_time_s"] = wall_time_s;
  return j;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_line(const std::vector<double>& values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ",";
    line += format_g17(values[i]);
  }
  line += "\n";
  return line;
}

nlohmann::json fit_to_json(const DecayFit& fit) {
  return {{"exponent", fit.exponent},
          {"log_constant", fit.log_constant},
          {"residual", fit.residual},
          {"window", {fit.window_min, fit.window_max}},
          {"n_points", fit.n_points}};
}

void emit(const Report& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw LabError("IOError", "cannot create output directory " + out_dir);
  {
    std::ofstream os(fs::path(out_dir) / (report.subcommand + "_report.json"));
    if (!os) throw LabError("IOError", "cannot write report.json");
    os << report.to_json().dump(2) << "\n";
  }
  for (const auto& [name, payload] : report.csv_files) {
    std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
    if (!os) throw LabError("IOError", "cannot write " + name);
    os << payload;
  }
  for (const auto& [name, payload] : report.json_files) {
    std::ofstream os(fs::path(out_dir) / name);
    if (!os) throw LabError("IOError", "cannot write " + name);
    os << payload.dump(2) << "\n";
  }
}

}  // namespace collapselab
