#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mpx/debug/session.hpp"

namespace mpx::debug {

/// One line of the client command language:
///
///     all: <MDWP command>
///     rank <N>: <MDWP command>
///     wait-hits <K>
///     wait-suspended <K>
///     wait-exit
///
/// Blank lines and lines starting with '#' are skipped by parse_script().
struct ScriptStep {
  enum class Kind { all, rank, wait_hits, wait_suspended, wait_exit };
  Kind kind = Kind::all;
  int rank = 0;
  int count = 0;
  std::string command;
};

/// Throws parse error naming the 1-based line.
std::vector<ScriptStep> parse_script(std::string_view text);
/// Parses a single REPL/script line; nullopt for blank or comment lines.
std::optional<ScriptStep> parse_step(std::string_view line);

struct ScriptOptions {
  std::chrono::milliseconds wait_timeout{30000};
  /// Events with a lower sequence number are neither counted nor written.
  std::uint64_t first_event = 0;
};

struct ScriptResult {
  bool ok = true;
  std::string error;                // set when ok is false
  std::vector<std::string> transcript;
  std::map<int, int> exit_codes;    // filled by wait-exit
};

/// Runs the steps in order.
///
/// Sent lines appear as "[rank N] > CMD", replies as "[rank N] < LINE", in
/// rank order. Agent events are written at each wait step (and at the end),
/// grouped by rank in arrival order, so a deterministic program gives a
/// deterministic transcript. `wait-hits K` and `wait-suspended K` consume K
/// more HIT / SUSPENDED events than earlier waits did; a wait that times out
/// stops the script with the partial transcript.
ScriptResult run_script(Session& session, const std::vector<ScriptStep>& steps, ScriptOptions options = {});

}  // namespace mpx::debug
