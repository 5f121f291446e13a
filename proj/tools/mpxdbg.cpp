#include <algorithm>
#include <atomic>
#include <csignal>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mpx/debug/gateway.hpp"
#include "mpx/debug/script.hpp"
#include "mpx/debug/session.hpp"
#include "mpx/error.hpp"
#include "mpx/fileio.hpp"
#include "mpx/launcher/conf_file.hpp"

namespace {

std::atomic<bool> interrupted{false};

void on_signal(int) { interrupted.store(true); }

void print_events(mpx::debug::Session& session, std::uint64_t& next) {
  for (const auto& e : session.events_since(next, std::chrono::milliseconds(0))) {
    next = e.seq + 1;
    if (e.from_agent) std::cout << "[rank " << e.rank << "] " << e.line() << '\n';
  }
}

void repl(mpx::debug::Session& session, const mpx::debug::ScriptOptions& script_options) {
  std::uint64_t next = 0;
  std::string line;
  print_events(session, next);
  std::cout << "mpxdbg> " << std::flush;
  while (std::getline(std::cin, line)) {
    print_events(session, next);
    if (line == "quit" || line == "exit") break;
    if (line == "help") {
      std::cout << "  all: CMD | rank N: CMD | CMD (to all) | wait-hits K | wait-suspended K | wait-exit | events | quit\n";
    } else if (line != "events") {
      try {
        auto step = mpx::debug::parse_step(line);
        if (!step && !line.empty() && line.front() != '#' && line.find(':') == std::string::npos) {
          step = mpx::debug::parse_step("all: " + line);
        }
        if (step) {
          auto options = script_options;
          options.first_event = next;
          auto result = mpx::debug::run_script(session, {*step}, options);
          for (const auto& t : result.transcript) {
            if (t.find("] > ") == std::string::npos) std::cout << t << '\n';
          }
          if (!result.ok) std::cout << "error: " << result.error << '\n';
          next = session.events().size();
        }
      } catch (const mpx::Error& e) {
        std::cout << "error: " << e.what() << '\n';
      }
    }
    print_events(session, next);
    std::cout << "mpxdbg> " << std::flush;
  }
  session.detach_all();
}

}  // namespace

int main(int argc, char** argv) {
  // Accept the single-dash spelling used by the launcher's flags.
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    args.push_back(a == "-conf" ? "--conf" : a);
  }
  std::reverse(args.begin(), args.end());

  CLI::App app{"Multi-rank debugger client"};
  std::string conf_path = "mpjdev.conf";
  std::string script_path;
  int gateway_port = -1;
  std::string static_dir;
  std::string gateway_host = "127.0.0.1";
  double wait_timeout_s = 30;
  double connect_timeout_s = 10;
  app.add_option("--conf", conf_path, "conf file written by mpxrun");
  app.add_option("--script", script_path, "run a command script and print the transcript");
  app.add_option("--gateway", gateway_port, "serve the HTTP gateway on this port (0 picks one)");
  app.add_option("--gateway-host", gateway_host, "gateway bind address");
  app.add_option("--static", static_dir, "directory served at / by the gateway");
  app.add_option("--timeout", wait_timeout_s, "seconds per script wait step");
  app.add_option("--connect-timeout", connect_timeout_s, "seconds to wait for agents to listen");
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  mpx::debug::SessionOptions session_options;
  session_options.connect_timeout = std::chrono::milliseconds(static_cast<long>(connect_timeout_s * 1000));
  mpx::debug::ScriptOptions script_options;
  script_options.wait_timeout = std::chrono::milliseconds(static_cast<long>(wait_timeout_s * 1000));

  try {
    auto conf = mpx::launcher::ConfFile::read(conf_path);
    std::vector<mpx::debug::ScriptStep> steps;
    if (!script_path.empty()) steps = mpx::debug::parse_script(mpx::read_file(script_path));

    auto session = mpx::debug::Session::attach_all(conf, session_options);
    std::unique_ptr<mpx::debug::Gateway> gateway;
    if (gateway_port >= 0) {
      mpx::debug::GatewayOptions gw;
      gw.host = gateway_host;
      gw.port = gateway_port;
      gw.static_dir = static_dir;
      gateway = std::make_unique<mpx::debug::Gateway>(*session, gw);
      gateway->start();
      std::cout << "gateway listening on http://" << gw.host << ":" << gateway->port() << std::endl;
    }

    int code = 0;
    if (!script_path.empty()) {
      auto result = mpx::debug::run_script(*session, steps, script_options);
      for (const auto& t : result.transcript) std::cout << t << '\n';
      std::cout.flush();
      if (!result.ok) {
        std::cerr << "mpxdbg: script failed: " << result.error << '\n';
        code = 1;
      }
    } else if (!gateway) {
      repl(*session, script_options);
    }
    if (gateway) {
      while (!interrupted.load() && !session->finished()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      gateway->stop();
    }
    return code;
  } catch (const mpx::Error& e) {
    std::cerr << "mpxdbg: " << e.what() << '\n';
    return 1;
  }
}
