#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "config.hpp"

namespace csbp::cli {

struct CommandOptions {
  bool paths = false;   // emit per-path CSVs (simulate)
  bool quiet = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct CommandResult {
  int exit_code = 0;
  std::filesystem::path run_dir;
};

/// Runs one command on an already resolved configuration and writes its run
/// directory under [run] out. Text output goes to `log` unless quiet.
CommandResult run_command(Command cmd, const RunConfig& cfg, const CommandOptions& opts,
                          std::ostream& log);

/// "Supercritical, λ* = 1.0, Grey: true" and the like.
std::string mechanism_summary_line(const BranchingMechanism& mech);

}  // namespace csbp::cli
