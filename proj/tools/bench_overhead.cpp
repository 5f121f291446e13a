#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpx/bench/bench.hpp"
#include "mpx/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Relative profiling overhead between two benchmark result files"};
  std::string base;
  std::string profiled;
  app.add_option("--base", base, "results without profiling")->required();
  app.add_option("--profiled", profiled, "results with profiling")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    auto rows = mpx::bench::overhead_report(mpx::bench::read_csv(base), mpx::bench::read_csv(profiled));
    std::cout << mpx::bench::format_overhead(rows);
    return 0;
  } catch (const mpx::Error& e) {
    std::cerr << "bench-overhead: " << e.what() << '\n';
    return 1;
  }
}
