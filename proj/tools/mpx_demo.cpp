// Demo rank program for mpxrun: a few "compute" rounds with a ring exchange.
#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "mpx/harness/probe.hpp"
#include "mpx/runtime.hpp"

namespace {

struct DemoOptions {
  int iters = 3;
  int fail_rank = -1;
  int fail_code = 3;
  int kill_rank = -1;
  int work_ms = 0;
};

long compute(int rank, int iter, int work_ms) {
  if (work_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(work_ms));
  long acc = 0;
  for (int i = 0; i < 1000; ++i) acc += (rank + 1) * (iter + 1) * i % 7;
  return acc;
}

int demo_rank(mpx::CommContext& ctx, const DemoOptions& opt) {
  int iter = 0;
  ctx.register_inspectable("iter", [&iter] { return std::to_string(iter); });
  long checksum = 0;
  mpx::probe::probe_scope("main", [&] {
    int next = (ctx.rank() + 1) % ctx.size();
    int prev = (ctx.rank() + ctx.size() - 1) % ctx.size();
    for (iter = 0; iter < opt.iters; ++iter) {
      long value = mpx::probe::probe_scope("compute", [&] { return compute(ctx.rank(), iter, opt.work_ms); });
      ctx.send(next, 1, std::to_string(value));
      checksum += std::stol(ctx.recv_string(prev, 1));
    }
    ctx.barrier();
  });
  std::cout << "rank " << ctx.rank() << " of " << ctx.size() << " done checksum " << checksum << std::endl;
  if (ctx.rank() == opt.kill_rank) std::raise(SIGKILL);
  if (ctx.rank() == opt.fail_rank) return opt.fail_code;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mpx demo rank program"};
  DemoOptions opt;
  app.add_option("--iters", opt.iters, "compute rounds")->check(CLI::NonNegativeNumber);
  app.add_option("--fail-rank", opt.fail_rank, "rank that returns --fail-code");
  app.add_option("--fail-code", opt.fail_code, "exit code of the failing rank");
  app.add_option("--kill-rank", opt.kill_rank, "rank that kills its own process");
  app.add_option("--work-ms", opt.work_ms, "sleep inside each compute call")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);
  return mpx::run([&](mpx::CommContext& ctx) { return demo_rank(ctx, opt); });
}
