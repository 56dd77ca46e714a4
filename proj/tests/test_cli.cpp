#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "collapselab/experiments.hpp"
#include "collapselab/parallel.hpp"

using namespace collapselab;
using nlohmann::json;

TEST_CASE("seed is mandatory") {
  json cfg = json::object();
  CHECK_THROWS_AS(run_experiment("diophantine", cfg), ConfigError);
  CHECK_THROWS_AS(run_experiment("nope", json{{"seed", 1}}), ConfigError);
}

TEST_CASE("diophantine experiment passes its own verdicts") {
  json cfg{{"seed", 1}};
  Report rep = run_experiment("diophantine", cfg);
  CHECK(rep.all_pass());
  CHECK(!rep.rows.empty());
  // report JSON round-trips
  json j = rep.to_json();
  json parsed = json::parse(j.dump());
  CHECK(parsed["subcommand"] == "diophantine");
  CHECK(parsed["tool_version"] == std::string(kToolVersion));
}

TEST_CASE("empty parameter grid yields a header-only CSV") {
  json cfg{{"seed", 3},
           {"model", {{"type", "flat_screw"}, {"theta_rational", {1, 3}}}},
           {"params", {{"t_values", json::array()}}}};
  Report rep = run_experiment("inj-profile", cfg);
  REQUIRE(!rep.csv_files.empty());
  CHECK(rep.csv_files[0].second == "r,inj,infinite,incomplete\n");
}

TEST_CASE("re-running an identical config is byte-identical modulo wall time") {
  json cfg{{"seed", 31},
           {"model", {{"type", "flat_screw"}, {"theta_rational", {2, 5}}}},
           {"params", {{"t_values", {8.0, 20.0}}}}};
  json a = run_experiment("inj-profile", cfg).to_json();
  json b = run_experiment("inj-profile", cfg).to_json();
  a.erase("wall_time_s");
  b.erase("wall_time_s");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("identical config and seed give identical CSV bytes across threads") {
  json cfg{{"seed", 77},
           {"model", {{"type", "euclidean"}}},
           {"params",
            {{"t_values", {1.0, 2.0}}, {"samples", 1 << 14}, {"growth_exponent", 3.0},
             {"band", 3.0}, {"max_std_error_rel", 0.05}}}};
  int saved = worker_threads();
  std::vector<std::string> payloads;
  for (int threads : {1, 4}) {
    worker_threads() = threads;
    Report rep = run_experiment("volume-growth", cfg);
    payloads.push_back(rep.csv_files[0].second);
  }
  worker_threads() = saved;
  CHECK(payloads[0] == payloads[1]);
}

TEST_CASE("emit writes the report and csv files") {
  namespace fs = std::filesystem;
  json cfg{{"seed", 5}};
  Report rep = run_experiment("diophantine", cfg);
  fs::path dir = fs::temp_directory_path() / "collapselab_test_out";
  fs::remove_all(dir);
  emit(rep, dir.string());
  CHECK(fs::exists(dir / "diophantine_report.json"));
  CHECK(fs::exists(dir / "continued_fraction.csv"));
  std::ifstream is(dir / "diophantine_report.json");
  json parsed;
  is >> parsed;
  CHECK(parsed.contains("verdicts"));
  fs::remove_all(dir);
}

TEST_CASE("inj-profile on the rational quotient grades the plateau") {
  json cfg{{"seed", 9},
           {"model", {{"type", "flat_screw"}, {"theta_rational", {1, 3}}}},
           {"params", {{"t_values", {10.0, 20.0, 50.0}}}}};
  Report rep = run_experiment("inj-profile", cfg);
  CHECK(rep.all_pass());
  for (const auto& row : rep.rows) CHECK(row.at("inj").get<double>() == 1.5);
}
