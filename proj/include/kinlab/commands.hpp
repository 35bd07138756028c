#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kinlab/run_config.hpp"

namespace kinlab {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitInvalid = 2, kExitNumerical = 3 };

struct CommandOptions
{
  std::string out_dir;  ///< overrides [global] output_dir when set
  int threads = 1;
  std::optional<std::uint64_t> seed;  ///< overrides [global] seed when set
};

std::vector<std::string> command_names();

/**
 * Runs one subcommand.  Writes its artifacts and manifest.json under the
 * output directory, prints a short summary to `log`, and maps failures onto
 * the exit-code contract.
 */
int run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);

}  // namespace kinlab
