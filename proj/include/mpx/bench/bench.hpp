#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mpx/harness/context.hpp"

namespace mpx::bench {

/// One measured configuration. Ping-pong rows fill the latency, bandwidth
/// and round-trip columns; EP rows fill wall time and checksum.
struct BenchResult {
  std::string benchmark;      // "pingpong" or "ep"
  int np = 1;
  std::int64_t size = 0;      // message bytes, or the EP scale
  int reps = 1;
  std::uint64_t seed = 0;
  bool profiled = false;
  double latency_us = 0;      // median round trip / 2
  double bandwidth_mbps = 0;  // size * 8 * 2 / median round trip
  double round_trip_us = 0;
  double wall_s = 0;
  std::int64_t checksum = 0;

  friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

std::string csv_header();
std::string to_csv_row(const BenchResult& r);
/// Throws parse error naming the line.
std::vector<BenchResult> parse_csv(std::string_view text, const std::string& source);
std::vector<BenchResult> read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<BenchResult>& rows);

double median(std::vector<double> values);

/// Rank 0 sends, rank 1 echoes; `warmup` untimed rounds precede `reps` timed
/// ones for each size. Rank 0 returns one row per size, rank 1 none. Throws
/// usage error unless the context has exactly two ranks.
std::vector<BenchResult> pingpong(CommContext& ctx, const std::vector<std::int64_t>& sizes, int reps,
                                  int warmup, bool profiled);
/// Same exchange with profiled and unprofiled blocks of `block` round trips
/// interleaved in one run (order ABBA), so both conditions see the same
/// machine state. Profiling is paused per thread during unprofiled blocks.
/// Rank 0 returns an unprofiled and a profiled row per size. Throws usage
/// error unless a profiler is installed.
std::vector<BenchResult> pingpong_interleaved(CommContext& ctx, const std::vector<std::int64_t>& sizes, int reps,
                                              int warmup, int block);

/// reps / 10, at least 1.
int default_warmup(int reps);

/// Linear congruential stream x' = a*x + c (mod 2^64) with O(log n) skip.
class Lcg {
 public:
  static constexpr std::uint64_t multiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t increment = 1442695040888963407ULL;

  explicit Lcg(std::uint64_t state) : state_(state) {}
  std::uint64_t next();
  /// Equivalent to calling next() `steps` times.
  void skip(std::uint64_t steps);
  /// Uniform in [0, 1) from the top 53 bits of the next draw.
  double uniform();
  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Starting state of the global stream for a seed.
std::uint64_t ep_initial_state(std::uint64_t seed);

/// Pairs [first, first + count) of the global stream that fall inside the
/// unit circle.
std::int64_t ep_count(std::uint64_t seed, std::uint64_t first, std::uint64_t count);

/// First pair and pair count of `rank`'s share of 2^scale pairs.
std::pair<std::uint64_t, std::uint64_t> ep_share(int scale, int rank, int size);

/// 2^scale pairs split evenly across ranks; rank 0 gathers the counts.
/// Rank 0's row carries the total count as checksum; other ranks return
/// their partial count. Throws usage error for scale < 10 or scale > 40.
BenchResult ep_kernel(CommContext& ctx, int scale, std::uint64_t seed, bool profiled);

struct OverheadRow {
  std::string benchmark;
  std::int64_t size = 0;
  std::string metric;
  double base = 0;
  double profiled = 0;
  double overhead_pct = 0;  // from the time-like quantity of the metric
};

/// Relative overhead 100 * (profiled_time - base_time) / base_time per
/// metric; negative values are kept. Throws report error when the inputs do
/// not describe the same configurations.
double overhead_pct(double base_time, double profiled_time);
std::vector<OverheadRow> overhead_report(const std::vector<BenchResult>& base,
                                         const std::vector<BenchResult>& profiled);
std::string format_overhead(const std::vector<OverheadRow>& rows);

}  // namespace mpx::bench
