#include <iostream>
#include <string>
#include <vector>

#include "mpx/error.hpp"
#include "mpx/launcher/config.hpp"
#include "mpx/launcher/spawn.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.size() == 1 && (args[0] == "-h" || args[0] == "--help")) {
    std::cout << mpx::launcher::usage_text();
    return 0;
  }
  mpx::launcher::LaunchConfig config;
  try {
    config = mpx::launcher::parse_cli(args);
  } catch (const mpx::Error& e) {
    std::cerr << "mpxrun: " << e.what() << '\n' << mpx::launcher::usage_text();
    return 2;
  }
  try {
    return mpx::launcher::launch(config, std::cout, std::cerr);
  } catch (const mpx::Error& e) {
    std::cerr << "mpxrun: " << e.what() << '\n';
    return 1;
  }
}
