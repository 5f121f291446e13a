#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpx/harness/environment.hpp"
#include "mpx/process.hpp"

namespace mpx::launcher {

inline constexpr int default_port_base = 20000;

struct LaunchConfig {
  int np = 1;
  Mode mode = Mode::multicore;
  std::string machines_file;
  std::vector<std::string> machines;
  std::optional<int> debug_port_base;  // set = debug mode
  bool suspend_on_start = false;
  bool profile = false;
  bool trace = false;
  std::filesystem::path profile_dir = ".";
  std::filesystem::path conf_path = "mpjdev.conf";
  int port_base = default_port_base;  // conf ports when not debugging
  std::string remote_exec;            // e.g. "ssh {host}"; empty = local exec
  /// After one process fails, how long the others may run before they are
  /// terminated.
  std::chrono::milliseconds abort_grace{3000};
  std::vector<std::string> program;
  process::EnvList extra_env;

  bool debug() const { return debug_port_base.has_value(); }
  /// Base for the conf file's port column.
  int conf_port_base() const { return debug_port_base.value_or(port_base); }
};

/// Machines file: one address per line, '#' comments and blank lines ignored.
std::vector<std::string> parse_machines(std::string_view text);
std::vector<std::string> read_machines_file(const std::filesystem::path& path);

/// Parses `mpxrun` arguments (without argv[0]):
///
///     -np N [-dev multicore|cluster] [-machines FILE] [-debug PORT] [-suspend]
///     [-profile] [-trace] [-profdir DIR] [-conf FILE] [-portbase PORT]
///     [-rsh TEMPLATE] [-grace SECONDS] [--env K=V]... -- PROGRAM [ARGS...]
///
/// Throws usage error. Reads the machines file in cluster mode.
LaunchConfig parse_cli(const std::vector<std::string>& args);

std::string usage_text();

}  // namespace mpx::launcher
