#pragma once

// The four pipeline commands. Each returns its files as in-memory artifacts
// plus a human-readable summary; writing them out is the caller's business.

#include <string>
#include <vector>

#include "divavg/config.hpp"
#include "divavg/errors.hpp"

namespace divavg {

struct Artifact {
  std::string name;
  std::string content;
};

struct CommandResult {
  int status = 0;  // process exit code
  std::vector<Artifact> artifacts;
  std::string summary;
};

/// 2 for validation, usage and PSD faults, 3 for an exhausted horizon, 4 for numerical faults.
int exit_code(ErrorKind kind) noexcept;

CommandResult cmd_spectrum(const RunConfig& config);
CommandResult cmd_construct(const RunConfig& config);
CommandResult cmd_verify(const RunConfig& config);
CommandResult cmd_simulate(const RunConfig& config);

/// Dispatches on "spectrum", "construct", "verify" or "simulate".
CommandResult run_command(const std::string& name, const RunConfig& config);

/// Shortest round-trip decimal, independent of the locale.
std::string format_number(double value);

}  // namespace divavg
