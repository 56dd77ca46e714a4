#ifndef COLLAPSELAB_EXPERIMENTS_HPP
#define COLLAPSELAB_EXPERIMENTS_HPP

// Experiment drivers behind the CLI subcommands. Each driver maps onto the
// module operations, collects rows/fits, and grades verdicts against the
// bounds declared in the config (echoed into the report).

#include "collapselab/report.hpp"

namespace collapselab {

// subcommands: inj-profile, volume-growth, curvature-decay, pseudo-group,
// holonomy-decay, gh-chart, fibration, diophantine, all
Report run_experiment(const std::string& subcommand, const nlohmann::json& config);

std::vector<std::string> experiment_names();

}  // namespace collapselab

#endif
