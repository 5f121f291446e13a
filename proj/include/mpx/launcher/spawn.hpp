#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mpx/launcher/config.hpp"
#include "mpx/launcher/placement.hpp"
#include "mpx/process.hpp"

namespace mpx::launcher {

/// One OS process hosting ranks [first_rank, last_rank].
struct RankProcess {
  int first_rank = 0;
  int last_rank = 0;
  std::string label;  // output prefix, e.g. "[rank 2] "
  process::Child child;
};

struct ProcessSet {
  std::vector<RankProcess> processes;
};

struct RankOutcome {
  int first_rank = 0;
  int last_rank = 0;
  process::ExitStatus status;
  bool aborted = false;  // terminated by the launcher after another rank failed
};

struct ExitReport {
  std::vector<RankOutcome> outcomes;

  bool success() const;
  /// 0 when every process exited 0; otherwise the shell code of the first
  /// rank that failed without being stopped by the launcher.
  int exit_code() const;
  /// Status per rank (multicore ranks share their process's status).
  std::map<int, process::ExitStatus> by_rank() const;
};

/// Environment for the process hosting `rank` (or all ranks in multicore).
process::EnvList child_environment(const LaunchConfig& config, const PlacementEntry& entry,
                                   const std::filesystem::path& conf_path);

/// Command line for `entry`: the program itself, or the remote-exec template
/// with {host} substituted followed by `env K=V... PROGRAM ARGS`.
std::vector<std::string> child_command(const LaunchConfig& config, const PlacementEntry& entry,
                                       const process::EnvList& env);

/// Starts every rank. The conf file must already be written. Throws launch
/// error naming the rank that could not be started.
ProcessSet spawn(const LaunchConfig& config, const Placement& placement,
                 const std::filesystem::path& conf_path);

/// Forwards each process's stdout/stderr line by line with its label and
/// waits for all of them. Once a process fails, the rest get `abort_grace`
/// to finish before they are sent SIGTERM (and SIGKILL a second later).
ExitReport monitor(ProcessSet& procs, std::ostream& out, std::ostream& err,
                   std::chrono::milliseconds abort_grace = std::chrono::milliseconds(3000));

/// Places ranks, writes the conf file, spawns, monitors, and reports failing
/// ranks on `err`. Returns the overall exit code.
int launch(const LaunchConfig& config, std::ostream& out, std::ostream& err);

/// Placement used by launch(): block placement over the machines with ports
/// from conf_port_base().
Placement plan(const LaunchConfig& config);

}  // namespace mpx::launcher
