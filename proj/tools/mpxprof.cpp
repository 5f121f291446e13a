#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mpx/error.hpp"
#include "mpx/prof/analysis.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Profile aggregation and reporting"};
  app.require_subcommand(1);

  std::string dir;
  std::string scope = "per-thread";
  std::string sort = "excl";
  std::string units = "us";
  std::string format = "table";
  std::string out;

  auto* report = app.add_subcommand("report", "print statistics tables");
  report->add_option("DIR", dir, "profile directory")->required();
  report->add_option("--scope", scope, "per-thread|mean|total")->check(CLI::IsMember({"per-thread", "mean", "total"}));
  report->add_option("--sort", sort, "excl|incl|calls")->check(CLI::IsMember({"excl", "incl", "calls"}));
  report->add_option("--units", units, "s|ms|us")->check(CLI::IsMember({"s", "ms", "us"}));
  report->add_option("--format", format, "table|csv")->check(CLI::IsMember({"table", "csv"}));

  auto* validate = app.add_subcommand("validate", "check profile invariants");
  validate->add_option("DIR", dir, "profile directory")->required();

  auto* merge = app.add_subcommand("merge", "merge trace files into one timeline");
  merge->add_option("DIR", dir, "trace directory")->required();
  merge->add_option("-o,--output", out, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      mpx::prof::ReportOptions opt;
      opt.scope = mpx::prof::parse_scope(scope);
      opt.sort = mpx::prof::parse_sort_key(sort);
      opt.units = mpx::prof::parse_units(units);
      opt.format = mpx::prof::parse_format(format);
      std::cout << mpx::prof::report(mpx::prof::load_profiles(dir), opt);
      return 0;
    }
    if (validate->parsed()) {
      auto set = mpx::prof::load_profiles(dir);
      auto violations = mpx::prof::validate(set);
      for (const auto& v : violations) std::cout << v.describe() << '\n';
      if (!violations.empty()) return 1;
      std::cout << set.entries.size() << " profiles clean\n";
      return 0;
    }
    auto count = mpx::prof::merge_traces(dir, out);
    std::cout << "merged " << count << " events into " << out << '\n';
    return 0;
  } catch (const mpx::Error& e) {
    std::cerr << "mpxprof: " << e.what() << '\n';
    return 1;
  }
}
