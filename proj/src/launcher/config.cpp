#include "mpx/launcher/config.hpp"

#include "mpx/error.hpp"
#include "mpx/fileio.hpp"
#include "mpx/text.hpp"

namespace mpx::launcher {

std::vector<std::string> parse_machines(std::string_view contents) {
  std::vector<std::string> out;
  for (auto line : text::split(contents, '\n')) {
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (!line.empty()) out.emplace_back(line);
  }
  return out;
}

std::vector<std::string> read_machines_file(const std::filesystem::path& path) {
  std::string contents;
  try {
    contents = read_file(path);
  } catch (const Error&) {
    fail(ErrorKind::usage, "cannot read machines file " + path.string());
  }
  return parse_machines(contents);
}

std::string usage_text() {
  return "usage: mpxrun -np N [-dev multicore|cluster] [-machines FILE] [-debug PORT] [-suspend]\n"
         "              [-profile] [-trace] [-profdir DIR] [-conf FILE] [-portbase PORT]\n"
         "              [-rsh TEMPLATE] [-grace SECONDS] [--env K=V]... -- PROGRAM [ARGS...]\n";
}

LaunchConfig parse_cli(const std::vector<std::string>& args) {
  LaunchConfig cfg;
  bool have_np = false;
  size_t i = 0;
  auto value = [&](const std::string& flag) -> const std::string& {
    if (i + 1 >= args.size()) fail(ErrorKind::usage, flag + " requires a value");
    return args[++i];
  };
  auto int_value = [&](const std::string& flag) {
    const auto& raw = value(flag);
    auto v = text::parse_int(raw);
    if (!v || *v < -1'000'000'000 || *v > 1'000'000'000) fail(ErrorKind::usage, flag + ": not an integer: " + raw);
    return static_cast<int>(*v);
  };

  for (; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--") {
      cfg.program.assign(args.begin() + static_cast<long>(i) + 1, args.end());
      break;
    }
    if (a == "-np") {
      cfg.np = int_value(a);
      have_np = true;
    } else if (a == "-dev") {
      const auto& dev = value(a);
      if (dev == "multicore") {
        cfg.mode = Mode::multicore;
      } else if (dev == "cluster") {
        cfg.mode = Mode::cluster;
      } else {
        fail(ErrorKind::usage, "-dev must be multicore or cluster, got '" + dev + "'");
      }
    } else if (a == "-machines") {
      cfg.machines_file = value(a);
    } else if (a == "-debug") {
      cfg.debug_port_base = int_value(a);
    } else if (a == "-suspend") {
      cfg.suspend_on_start = true;
    } else if (a == "-profile") {
      cfg.profile = true;
    } else if (a == "-trace") {
      cfg.trace = true;
    } else if (a == "-profdir") {
      cfg.profile_dir = value(a);
    } else if (a == "-conf") {
      cfg.conf_path = value(a);
    } else if (a == "-portbase") {
      cfg.port_base = int_value(a);
    } else if (a == "-rsh") {
      cfg.remote_exec = value(a);
    } else if (a == "-grace") {
      int seconds = int_value(a);
      if (seconds < 0) fail(ErrorKind::usage, "-grace must be >= 0");
      cfg.abort_grace = std::chrono::seconds(seconds);
    } else if (a == "--env") {
      const auto& kv = value(a);
      auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) fail(ErrorKind::usage, "--env expects K=V, got '" + kv + "'");
      cfg.extra_env.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    } else {
      fail(ErrorKind::usage, "unknown flag '" + a + "'");
    }
  }

  if (!have_np) fail(ErrorKind::usage, "-np is required");
  if (cfg.np < 1) fail(ErrorKind::usage, "-np must be >= 1");
  if (cfg.program.empty()) fail(ErrorKind::usage, "missing program after --");
  if (cfg.mode == Mode::cluster) {
    if (cfg.machines_file.empty()) fail(ErrorKind::usage, "cluster mode requires -machines FILE");
    cfg.machines = read_machines_file(cfg.machines_file);
    if (cfg.machines.empty()) fail(ErrorKind::usage, "machines file lists no nodes");
  } else {
    cfg.machines = {"127.0.0.1"};
  }
  if (cfg.debug_port_base) {
    int hi = 65535 - 2 * cfg.np;
    if (*cfg.debug_port_base < 1024 || *cfg.debug_port_base > hi) {
      fail(ErrorKind::usage, "-debug port must be in [1024, " + std::to_string(hi) + "]");
    }
  }
  if (cfg.port_base < 1024 || cfg.port_base > 65535 - 2 * cfg.np) {
    fail(ErrorKind::usage, "-portbase out of range");
  }
  return cfg;
}

}  // namespace mpx::launcher
