#ifndef COLLAPSELAB_REPORT_HPP
#define COLLAPSELAB_REPORT_HPP

// Experiment reports: config echo, per-row results, decay fits, and verdicts
// against config-declared bounds. CSV uses 17-significant-digit scientific
// notation so regression diffs are meaningful; reports are byte-identical
// for identical (config, seed) modulo the wall_time_s field.

#include <json.hpp>
#include <string>
#include <vector>

#include "collapselab/asymptotics.hpp"

namespace collapselab {

inline const char* kToolVersion = "0.1.0";

struct Verdict {
  std::string name;
  std::string bound;  // human-readable bound the value was tested against
  double value = 0;
  bool pass = false;
};

struct Report {
  std::string subcommand;
  nlohmann::json config;
  std::vector<nlohmann::json> rows;
  std::vector<nlohmann::json> fits;
  std::vector<Verdict> verdicts;
  std::vector<std::pair<std::string, std::string>> csv_files;  // (name, payload)
  std::vector<std::pair<std::string, nlohmann::json>> json_files;
  double wall_time_s = 0;

  bool all_pass() const;
  nlohmann::json to_json() const;
};

std::string format_g17(double v);
std::string csv_line(const std::vector<double>& values);
nlohmann::json fit_to_json(const DecayFit& fit);

// writes report.json plus every attached CSV/JSON payload into out_dir
void emit(const Report& report, const std::string& out_dir);

}  // namespace collapselab

#endif
