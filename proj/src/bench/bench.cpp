#include "mpx/bench/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "mpx/error.hpp"
#include "mpx/fileio.hpp"
#include "mpx/harness/probe.hpp"
#include "mpx/text.hpp"

namespace mpx::bench {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::optional<double> parse_double(std::string_view s) {
  std::string copy(s);
  char* end = nullptr;
  double v = std::strtod(copy.c_str(), &end);
  if (copy.empty() || end != copy.c_str() + copy.size()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string csv_header() {
  return "benchmark,np,size,reps,seed,profiled,latency_us,bandwidth_mbps,round_trip_us,wall_s,checksum";
}

std::string to_csv_row(const BenchResult& r) {
  return r.benchmark + "," + std::to_string(r.np) + "," + std::to_string(r.size) + "," + std::to_string(r.reps) +
         "," + std::to_string(r.seed) + "," + (r.profiled ? "1" : "0") + "," + fmt_double(r.latency_us) + "," +
         fmt_double(r.bandwidth_mbps) + "," + fmt_double(r.round_trip_us) + "," + fmt_double(r.wall_s) + "," +
         std::to_string(r.checksum);
}

std::vector<BenchResult> parse_csv(std::string_view text, const std::string& source) {
  std::vector<BenchResult> rows;
  int number = 0;
  for (auto line : text::split(text, '\n')) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrorKind::parse, source + ":" + std::to_string(number) + ": " + why);
    };
    if (number == 1) {
      if (line != csv_header()) bad("unexpected header");
      continue;
    }
    auto f = text::split(line, ',');
    if (f.size() != 11) bad("expected 11 fields");
    BenchResult r;
    r.benchmark = std::string(f[0]);
    auto np = text::parse_int(f[1]);
    auto size = text::parse_int(f[2]);
    auto reps = text::parse_int(f[3]);
    auto seed = parse_u64(f[4]);
    auto lat = parse_double(f[6]);
    auto bw = parse_double(f[7]);
    auto rt = parse_double(f[8]);
    auto wall = parse_double(f[9]);
    auto sum = text::parse_int(f[10]);
    if (!np || !size || !reps || !seed || !lat || !bw || !rt || !wall || !sum || (f[5] != "0" && f[5] != "1")) {
      bad("malformed field");
    }
    r.np = static_cast<int>(*np);
    r.size = *size;
    r.reps = static_cast<int>(*reps);
    r.seed = *seed;
    r.profiled = f[5] == "1";
    r.latency_us = *lat;
    r.bandwidth_mbps = *bw;
    r.round_trip_us = *rt;
    r.wall_s = *wall;
    r.checksum = *sum;
    rows.push_back(std::move(r));
  }
  if (number == 0 || rows.empty()) fail(ErrorKind::parse, source + ": no result rows");
  return rows;
}

std::vector<BenchResult> read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

void write_csv(const std::filesystem::path& path, const std::vector<BenchResult>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += to_csv_row(r) + "\n";
  write_file_atomic(path, out);
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::argument, "median of no values");
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  double upper = *mid;
  double lower = *std::max_element(values.begin(), mid);
  return (lower + upper) / 2;
}

int default_warmup(int reps) { return std::max(1, reps / 10); }

std::vector<BenchResult> pingpong(CommContext& ctx, const std::vector<std::int64_t>& sizes, int reps, int warmup,
                                  bool profiled) {
  if (ctx.size() != 2) fail(ErrorKind::usage, "pingpong needs exactly 2 ranks, got " + std::to_string(ctx.size()));
  if (reps < 1) fail(ErrorKind::usage, "reps must be at least 1");
  constexpr Tag ping_tag = 11;
  std::vector<BenchResult> out;
  for (auto size : sizes) {
    if (size < 1 || size > (std::int64_t{1} << 30)) fail(ErrorKind::usage, "message size out of range");
    std::vector<std::byte> payload(static_cast<std::size_t>(size), std::byte{0x5a});
    ctx.barrier();
    if (ctx.rank() == 1) {
      for (int i = 0; i < warmup + reps; ++i) {
        Bytes msg = ctx.recv(0, ping_tag);
        ctx.send(0, ping_tag, msg);
      }
      continue;
    }
    std::vector<double> trips;
    trips.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < warmup + reps; ++i) {
      auto t0 = std::chrono::steady_clock::now();
      ctx.send(1, ping_tag, payload);
      Bytes echo = ctx.recv(1, ping_tag);
      auto t1 = std::chrono::steady_clock::now();
      if (echo.size() != payload.size()) fail(ErrorKind::transport, "echo length mismatch");
      if (i >= warmup) trips.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    BenchResult r;
    r.benchmark = "pingpong";
    r.np = ctx.size();
    r.size = size;
    r.reps = reps;
    r.profiled = profiled;
    r.round_trip_us = median(std::move(trips));
    r.latency_us = r.round_trip_us / 2;
    r.bandwidth_mbps = static_cast<double>(size) * 8 * 2 / r.round_trip_us;
    out.push_back(r);
  }
  return out;
}

std::vector<BenchResult> pingpong_interleaved(CommContext& ctx, const std::vector<std::int64_t>& sizes, int reps,
                                              int warmup, int block) {
  if (ctx.size() != 2) fail(ErrorKind::usage, "pingpong needs exactly 2 ranks, got " + std::to_string(ctx.size()));
  if (reps < 1 || block < 1) fail(ErrorKind::usage, "reps and block must be at least 1");
  if (!probe::installed(probe::Slot::profiler)) {
    fail(ErrorKind::usage, "interleaved pingpong needs profiling enabled (MPX_PROFILE=1)");
  }
  constexpr Tag ping_tag = 13;
  std::vector<BenchResult> out;
  for (auto size : sizes) {
    if (size < 1 || size > (std::int64_t{1} << 30)) fail(ErrorKind::usage, "message size out of range");
    std::vector<std::byte> payload(static_cast<std::size_t>(size), std::byte{0x5a});
    std::vector<double> trips[2];
    ctx.barrier();
    for (int i = 0; i < warmup; ++i) {
      if (ctx.rank() == 0) {
        ctx.send(1, ping_tag, payload);
        ctx.recv(1, ping_tag);
      } else {
        ctx.send(0, ping_tag, ctx.recv(0, ping_tag));
      }
    }
    // Both conditions get `reps` round trips; blocks alternate A B B A ...
    int done[2] = {0, 0};
    for (int b = 0; done[0] < reps || done[1] < reps; ++b) {
      int profiled = (b % 4 == 1 || b % 4 == 2) ? 1 : 0;
      if (done[profiled] >= reps) profiled = 1 - profiled;
      int n = std::min(block, reps - done[profiled]);
      probe::set_thread_profiler_paused(profiled == 0);
      for (int i = 0; i < n; ++i) {
        if (ctx.rank() == 0) {
          auto t0 = std::chrono::steady_clock::now();
          ctx.send(1, ping_tag, payload);
          Bytes echo = ctx.recv(1, ping_tag);
          auto t1 = std::chrono::steady_clock::now();
          if (echo.size() != payload.size()) fail(ErrorKind::transport, "echo length mismatch");
          trips[profiled].push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        } else {
          ctx.send(0, ping_tag, ctx.recv(0, ping_tag));
        }
      }
      probe::set_thread_profiler_paused(false);
      done[profiled] += n;
    }
    if (ctx.rank() != 0) continue;
    for (int profiled = 0; profiled < 2; ++profiled) {
      BenchResult r;
      r.benchmark = "pingpong";
      r.np = ctx.size();
      r.size = size;
      r.reps = reps;
      r.profiled = profiled == 1;
      r.round_trip_us = median(std::move(trips[profiled]));
      r.latency_us = r.round_trip_us / 2;
      r.bandwidth_mbps = static_cast<double>(size) * 8 * 2 / r.round_trip_us;
      out.push_back(r);
    }
  }
  return out;
}

std::uint64_t Lcg::next() {
  state_ = state_ * multiplier + increment;
  return state_;
}

void Lcg::skip(std::uint64_t steps) {
  // Compose the affine map x -> a*x + c with itself by repeated squaring.
  std::uint64_t acc_mult = 1;
  std::uint64_t acc_inc = 0;
  std::uint64_t cur_mult = multiplier;
  std::uint64_t cur_inc = increment;
  while (steps > 0) {
    if (steps & 1U) {
      acc_mult *= cur_mult;
      acc_inc = acc_inc * cur_mult + cur_inc;
    }
    cur_inc = (cur_mult + 1) * cur_inc;
    cur_mult *= cur_mult;
    steps >>= 1U;
  }
  state_ = acc_mult * state_ + acc_inc;
}

double Lcg::uniform() { return static_cast<double>(next() >> 11U) * 0x1.0p-53; }

std::uint64_t ep_initial_state(std::uint64_t seed) {
  // splitmix64 finaliser so nearby seeds start far apart.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31U);
}

std::int64_t ep_count(std::uint64_t seed, std::uint64_t first, std::uint64_t count) {
  Lcg gen(ep_initial_state(seed));
  gen.skip(2 * first);
  std::int64_t inside = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    double x = 2 * gen.uniform() - 1;
    double y = 2 * gen.uniform() - 1;
    if (x * x + y * y <= 1.0) ++inside;
  }
  return inside;
}

std::pair<std::uint64_t, std::uint64_t> ep_share(int scale, int rank, int size) {
  std::uint64_t total = std::uint64_t{1} << static_cast<unsigned>(scale);
  auto r = static_cast<std::uint64_t>(rank);
  auto n = static_cast<std::uint64_t>(size);
  std::uint64_t begin = total * r / n;
  std::uint64_t end = total * (r + 1) / n;
  return {begin, end - begin};
}

BenchResult ep_kernel(CommContext& ctx, int scale, std::uint64_t seed, bool profiled) {
  if (scale < 10) fail(ErrorKind::usage, "scale must be at least 10");
  if (scale > 40) fail(ErrorKind::usage, "scale must be at most 40");
  constexpr Tag count_tag = 12;
  ctx.barrier();
  auto t0 = std::chrono::steady_clock::now();
  auto [first, count] = ep_share(scale, ctx.rank(), ctx.size());
  std::int64_t local = probe::probe_scope("generate", [&] { return ep_count(seed, first, count); });
  std::int64_t total = probe::probe_scope("reduce", [&] {
    if (ctx.rank() != 0) {
      ctx.send(0, count_tag, std::to_string(local));
      return local;
    }
    std::int64_t sum = local;
    for (int r = 1; r < ctx.size(); ++r) {
      auto v = text::parse_int(ctx.recv_string(r, count_tag));
      if (!v) fail(ErrorKind::transport, "malformed partial count from rank " + std::to_string(r));
      sum += *v;
    }
    return sum;
  });
  auto t1 = std::chrono::steady_clock::now();

  BenchResult r;
  r.benchmark = "ep";
  r.np = ctx.size();
  r.size = scale;
  r.reps = 1;
  r.seed = seed;
  r.profiled = profiled;
  r.wall_s = std::chrono::duration<double>(t1 - t0).count();
  r.checksum = total;
  return r;
}

double overhead_pct(double base_time, double profiled_time) {
  if (!(base_time > 0)) fail(ErrorKind::report, "base time must be positive");
  return 100.0 * (profiled_time - base_time) / base_time;
}

std::vector<OverheadRow> overhead_report(const std::vector<BenchResult>& base,
                                         const std::vector<BenchResult>& profiled) {
  using Key = std::tuple<std::string, int, std::int64_t, int, std::uint64_t>;
  auto key = [](const BenchResult& r) { return Key{r.benchmark, r.np, r.size, r.reps, r.seed}; };
  auto describe = [](const BenchResult& r) {
    return r.benchmark + " np=" + std::to_string(r.np) + " size=" + std::to_string(r.size) +
           " reps=" + std::to_string(r.reps) + " seed=" + std::to_string(r.seed);
  };
  if (base.empty() || profiled.empty()) fail(ErrorKind::report, "no results to compare");
  if (base.size() != profiled.size()) fail(ErrorKind::report, "base and profiled runs have different row counts");

  std::map<Key, const BenchResult*> by_key;
  for (const auto& r : profiled) by_key[key(r)] = &r;
  std::vector<OverheadRow> out;
  for (const auto& b : base) {
    auto it = by_key.find(key(b));
    if (it == by_key.end()) fail(ErrorKind::report, "no profiled run matches " + describe(b));
    const BenchResult& p = *it->second;
    if (b.profiled || !p.profiled) fail(ErrorKind::report, "expected an unprofiled base and a profiled run");
    if (b.benchmark == "pingpong") {
      out.push_back({b.benchmark, b.size, "latency_us", b.latency_us, p.latency_us,
                     overhead_pct(b.latency_us, p.latency_us)});
      out.push_back({b.benchmark, b.size, "bandwidth_mbps", b.bandwidth_mbps, p.bandwidth_mbps,
                     overhead_pct(b.round_trip_us, p.round_trip_us)});
    } else {
      if (b.checksum != p.checksum) {
        fail(ErrorKind::report, "checksums differ for " + describe(b) + ": " + std::to_string(b.checksum) +
                                    " vs " + std::to_string(p.checksum));
      }
      out.push_back({b.benchmark, b.size, "wall_s", b.wall_s, p.wall_s, overhead_pct(b.wall_s, p.wall_s)});
    }
  }
  return out;
}

std::string format_overhead(const std::vector<OverheadRow>& rows) {
  std::string out = "benchmark  size  metric  base  profiled  overhead_pct\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s  %lld  %s  %.6g  %.6g  %.1f%%\n", r.benchmark.c_str(),
                  static_cast<long long>(r.size), r.metric.c_str(), r.base, r.profiled, r.overhead_pct);
    out += buf;
  }
  return out;
}

}  // namespace mpx::bench
