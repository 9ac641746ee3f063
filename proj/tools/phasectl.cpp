#include "phaseopt/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

void add_common_options(CLI::App* cmd, phaseopt::CommandRequest& req, std::string& out, long long& seed,
                        int& snapshots, bool& fields) {
  cmd->add_option("--config", req.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", out, "Output directory (overrides output.directory)");
  cmd->add_option("--seed", seed, "Seed for random controls and directions (overrides output.seed)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--snapshots", snapshots, "Write every k-th time level (overrides output.snapshots)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--sensitivity-fields", fields, "Also write adjoint and tangent fields");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward solves, optimal control and verification checks for the phase-field system"};
  app.require_subcommand(1);

  phaseopt::CommandRequest req;
  std::string out;
  long long seed = -1;
  int snapshots = 0;
  bool fields = false;

  auto* forward = app.add_subcommand("forward", "Solve the state system for control.u_init");
  add_common_options(forward, req, out, seed, snapshots, fields);
  auto* optimize = app.add_subcommand("optimize", "Projected gradient descent from control.u_init");
  add_common_options(optimize, req, out, seed, snapshots, fields);
  auto* check = app.add_subcommand("check", "Run one verification check and write its JSON report");
  check->add_option("name", req.check, "Check to run")
      ->required()
      ->check(CLI::IsMember({"grad", "tangent", "duality", "stability", "oracle", "bounds"}));
  add_common_options(check, req, out, seed, snapshots, fields);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : phaseopt::kExitError;
  }

  req.command = app.get_subcommands().front()->get_name();
  if (!out.empty()) req.out = out;
  if (seed >= 0) req.seed = static_cast<std::uint64_t>(seed);
  if (snapshots > 0) req.snapshots = snapshots;
  if (fields) req.sensitivity_fields = true;
  return phaseopt::run_command(req, std::cout, std::cerr);
}
