#pragma once

#include "phaseopt/grid.hpp"
#include "phaseopt/optimizer.hpp"
#include "phaseopt/potential.hpp"
#include "phaseopt/state_solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phaseopt {

struct OutputConfig {
  std::filesystem::path directory = "out";
  /// Write every `snapshots`-th level (the last level is always written).
  int snapshots = 1;
  std::uint64_t seed = 0;
  /// Also write p/q/xi/eta level CSVs from forward and optimize.
  bool sensitivity_fields = false;
  /// Write the control after every accepted optimizer iterate.
  bool control_iterates = false;
};

/// Settings of the `check` subcommands.
struct CheckConfig {
  std::vector<double> fd_lambdas{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> remainder_lambdas{1e-1, 3e-2, 1e-2, 3e-3};
  /// Number of seeded directions for grad, tangent and duality.
  int directions = 1;
  /// Number of seeded control pairs for stability.
  int pairs = 20;
  /// Pairs re-run on the refined grid by the stability check.
  int refine_pairs = 5;
  /// Number of seeded controls for bounds.
  int samples = 10;
};

struct RunConfig {
  Grid grid = make_grid(1, {1}, {1.0});
  TimeGrid tgrid{1.0, 1};
  ProblemData data;
  Potential pot;
  SolverConfig solver;
  OptimizerConfig optimizer;
  Trajectory u_init;
  OutputConfig output;
  CheckConfig check;
  /// Raw text of the file, hashed into reports.
  std::string source_text;
  std::filesystem::path source_path;
};

/// Reads and validates a JSON run configuration. Relative CSV paths resolve
/// against the directory of the config file.
RunConfig parse_config(const std::filesystem::path& path);

/// Same, from text already in memory; `base_dir` resolves relative paths.
RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir,
                            const std::string& origin = "<config>");

}  // namespace phaseopt
