#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpx/fileio.hpp"
#include "mpx/harness/probe.hpp"

namespace mpx::prof {

/// Synthetic top-level timer wrapping each thread.
inline constexpr std::string_view root_name = ".application";

struct ProfileIdentity {
  int node = 0;
  int context = 0;
  int thread = 0;

  friend auto operator<=>(const ProfileIdentity&, const ProfileIdentity&) = default;
};

std::string to_string(const ProfileIdentity& id);

/// `profile.<node>.<context>.<thread>` / `trace.<node>.<context>.<thread>`
std::string profile_file_name(const ProfileIdentity& id);
std::string trace_file_name(const ProfileIdentity& id);

/// Parses a file name of the given prefix ("profile" or "trace"); nullopt
/// when it does not match the scheme.
std::optional<ProfileIdentity> parse_file_name(std::string_view name, std::string_view prefix);

struct FunctionStats {
  std::string name;
  std::int64_t calls = 0;
  std::int64_t subrs = 0;
  std::int64_t excl_us = 0;
  std::int64_t incl_us = 0;

  friend bool operator==(const FunctionStats&, const FunctionStats&) = default;
};

/// Descending exclusive time, ties by name ascending.
void sort_by_exclusive(std::vector<FunctionStats>& functions);

/// Contents of one profile file.
///
///     <F> functions
///     "<name>" <calls> <subrs> <excl_us> <incl_us>     (F lines)
///     0 aggregates
///     # <comment>                                       (optional)
struct ProfileData {
  std::vector<FunctionStats> functions;
  std::vector<std::string> comments;  // without the leading "# "

  std::string encode() const;
  /// Throws parse error "<source>:<line>: ...".
  static ProfileData parse(std::string_view text, const std::string& source);

  friend bool operator==(const ProfileData&, const ProfileData&) = default;
};

struct TraceEvent {
  std::int64_t ts_us = 0;
  ThreadIndex thread = 0;
  probe::Kind kind = probe::Kind::enter;
  std::string name;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// `<ts_us> <thread> <enter|exit> "<name>"`
std::string encode_trace_line(const TraceEvent& e);
std::optional<TraceEvent> parse_trace_line(std::string_view line);

}  // namespace mpx::prof
