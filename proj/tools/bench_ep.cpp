#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpx/bench/bench.hpp"
#include "mpx/harness/environment.hpp"
#include "mpx/runtime.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Embarrassingly parallel Monte Carlo kernel"};
  int scale = 20;
  std::uint64_t seed = 1;
  std::string out = "ep.csv";
  app.add_option("--scale", scale, "2^scale random pairs in total");
  app.add_option("--seed", seed, "stream seed");
  app.add_option("--out", out, "CSV output file");
  CLI11_PARSE(app, argc, argv);
  bool profiled = mpx::getenv_or("MPX_PROFILE") == "1";

  return mpx::run([&](mpx::CommContext& ctx) {
    auto row = mpx::bench::ep_kernel(ctx, scale, seed, profiled);
    if (ctx.rank() != 0) return 0;
    mpx::bench::write_csv(out, {row});
    std::cout << "scale " << scale << "  checksum " << row.checksum << "  wall_s " << row.wall_s << '\n';
    return 0;
  });
}
