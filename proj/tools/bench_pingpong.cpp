#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mpx/bench/bench.hpp"
#include "mpx/error.hpp"
#include "mpx/harness/environment.hpp"
#include "mpx/runtime.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ping-pong latency and bandwidth (run under mpxrun -np 2)"};
  std::vector<std::int64_t> sizes{1, 1024, 1048576};
  int reps = 1000;
  int warmup = -1;
  int interleave = 0;
  std::string out = "pingpong.csv";
  app.add_option("--sizes", sizes, "message sizes in bytes")->delimiter(',');
  app.add_option("--reps", reps, "timed round trips per size")->check(CLI::PositiveNumber);
  app.add_option("--warmup", warmup, "untimed round trips per size (default reps/10)");
  app.add_option("--out", out, "CSV output file");
  app.add_option("--interleave", interleave,
                 "alternate profiled/unprofiled blocks of this many round trips in one run (needs -profile)")
      ->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);
  if (warmup < 0) warmup = mpx::bench::default_warmup(reps);
  bool profiled = mpx::getenv_or("MPX_PROFILE") == "1";

  return mpx::run([&](mpx::CommContext& ctx) {
    auto rows = interleave > 0 ? mpx::bench::pingpong_interleaved(ctx, sizes, reps, warmup, interleave)
                               : mpx::bench::pingpong(ctx, sizes, reps, warmup, profiled);
    if (ctx.rank() != 0) return 0;
    mpx::bench::write_csv(out, rows);
    for (const auto& r : rows) {
      std::cout << "size " << r.size << "  profiled " << r.profiled << "  latency_us " << r.latency_us << "  bandwidth_mbps " << r.bandwidth_mbps
                << '\n';
    }
    return 0;
  });
}
