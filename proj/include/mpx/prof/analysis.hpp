#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mpx/prof/format.hpp"

namespace mpx::prof {

/// Every profile file of a directory, keyed by the identity in its name.
struct ProfileSet {
  std::filesystem::path dir;
  std::map<ProfileIdentity, ProfileData> entries;
};

/// Loads files named profile.<n>.<c>.<t>; other names are skipped. Throws
/// parse error naming file and line for a malformed file.
ProfileSet load_profiles(const std::filesystem::path& dir);

enum class Scope { per_thread, mean, total };
enum class SortKey { excl, incl, calls };
enum class Units { s, ms, us };
enum class Format { table, csv };

Scope parse_scope(std::string_view s);
SortKey parse_sort_key(std::string_view s);
Units parse_units(std::string_view s);
Format parse_format(std::string_view s);
std::string_view to_string(Scope s);
std::string_view to_string(Units u);

/// Sums over the identities of a table. The reported value is sum / divisor;
/// divisor is the identity count for the mean scope and 1 otherwise.
struct AggregateRow {
  std::string name;
  std::int64_t calls = 0;
  std::int64_t subrs = 0;
  std::int64_t excl_us = 0;
  std::int64_t incl_us = 0;
  std::int64_t divisor = 1;

  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct ReportTable {
  std::string title;  // identity for per-thread tables, scope otherwise
  std::vector<AggregateRow> rows;
};

/// Per-thread: one table per identity in identity order. Mean and total: one
/// table over all identities, with a function missing from an identity
/// counted as zero there. Rows sorted descending by the key, ties by name.
/// Throws report error for an empty set.
std::vector<ReportTable> aggregate(const ProfileSet& set, Scope scope, SortKey key);

/// Exact decimal rendering of numerator / (divisor * unit) where unit is the
/// number of microseconds in `units`. Seconds and milliseconds always show
/// three decimals (half away from zero); microseconds show an integer when
/// divisor is 1 and three decimals otherwise.
std::string format_time(std::int64_t numerator_us, std::int64_t divisor, Units units);
/// Counts: an integer when divisor is 1, else three decimals.
std::string format_count(std::int64_t numerator, std::int64_t divisor);

struct ReportOptions {
  Scope scope = Scope::per_thread;
  SortKey sort = SortKey::excl;
  Units units = Units::us;
  Format format = Format::table;
};

/// Table format: a title line, a header, then one row per function; columns
/// are separated by at least two spaces. CSV format: a single header row
/// then one row per function with a leading table column.
std::string report(const ProfileSet& set, const ReportOptions& options);

struct Violation {
  ProfileIdentity identity;
  std::string function;  // empty for whole-profile violations
  std::string message;

  std::string describe() const;
};

/// Checks incl >= excl, non-negative values, and that the exclusive times
/// sum to the root's inclusive time. Empty list means clean.
std::vector<Violation> validate(const ProfileSet& set);

struct TraceSet {
  std::map<ProfileIdentity, std::vector<TraceEvent>> traces;

  friend bool operator==(const TraceSet&, const TraceSet&) = default;
};

/// Loads files named trace.<n>.<c>.<t>. Throws parse error naming file and
/// line for an unparseable event.
TraceSet load_traces(const std::filesystem::path& dir);

struct MergedEvent {
  ProfileIdentity identity;
  TraceEvent event;

  friend bool operator==(const MergedEvent&, const MergedEvent&) = default;
};

/// All events ordered by timestamp; ties by identity, then file order.
std::vector<MergedEvent> merge(const TraceSet& set);
/// `<ts_us> <node> <context> <thread> <enter|exit> "<name>"` per line.
std::string encode_merged(const std::vector<MergedEvent>& events);
std::vector<MergedEvent> parse_merged(std::string_view text, const std::string& source);
/// Inverse of merge(): events regrouped by identity in timeline order.
TraceSet split(const std::vector<MergedEvent>& events);

/// Loads, merges and writes `out`. Throws report error when the directory
/// has no trace files. Returns the number of events written.
std::size_t merge_traces(const std::filesystem::path& dir, const std::filesystem::path& out);

}  // namespace mpx::prof
