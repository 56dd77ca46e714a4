// collapse-lab: experiment runner for the model-manifold laboratory.
// Usage: collapse-lab <subcommand> --config path.json --out dir [--seed N] [--threads K]
// Exit codes: 0 all verdicts pass, 2 any verdict fails, 3 config error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "collapselab/experiments.hpp"
#include "collapselab/parallel.hpp"

using namespace collapselab;

int main(int argc, char** argv) {
  CLI::App app{"collapse-lab: numerical laboratory for collapsing model manifolds"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  long long seed = -1;
  int threads = 0;

  std::vector<CLI::App*> subs;
  for (const std::string& name : experiment_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "root RNG seed (overrides config)");
    sub->add_option("--threads", threads, "worker thread count (0 = hardware)");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);
  std::string subcommand = app.get_subcommands().front()->get_name();

  nlohmann::json config = nlohmann::json::object();
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) {
        std::cerr << "config error: cannot open " << config_path << "\n";
        return 3;
      }
      is >> config;
    }
    if (seed >= 0) config["seed"] = std::uint64_t(seed);
    if (!config.contains("seed")) config["seed"] = std::uint64_t(20260808);
    if (threads > 0) worker_threads() = threads;

    Report rep = run_experiment(subcommand, config);
    emit(rep, out_dir);
    for (const Verdict& v : rep.verdicts)
      std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << v.name << ": value "
                << format_g17(v.value) << " vs " << v.bound << "\n";
    std::cout << rep.subcommand << ": " << (rep.all_pass() ? "all pass" : "FAILURES") << " ("
              << rep.verdicts.size() << " checks, " << rep.wall_time_s << " s)\n";
    return rep.all_pass() ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const LabError& e) {
    std::cerr << "error [" << e.tag() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
