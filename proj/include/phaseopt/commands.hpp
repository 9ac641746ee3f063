#pragma once

#include "phaseopt/config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace phaseopt {

/// Exit statuses of run_command.
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitError = 2;

/// One phasectl invocation. Unset optionals keep the values from the config file.
struct CommandRequest {
  /// "forward", "optimize" or "check".
  std::string command;
  /// grad, tangent, duality, stability, oracle or bounds (check only).
  std::string check;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> snapshots;
  std::optional<bool> sensitivity_fields;
};

/// Parses the config, runs the command, writes its outputs and returns the exit
/// status. Reports go to `out`, warnings and errors to `err`; nothing throws.
int run_command(const CommandRequest& req, std::ostream& out, std::ostream& err);

/// Same with an already parsed configuration.
int run_command(const CommandRequest& req, const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace phaseopt
