#include "mpx/launcher/spawn.hpp"

#include <unistd.h>

#include <csignal>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "mpx/error.hpp"
#include "mpx/text.hpp"

namespace mpx::launcher {

bool ExitReport::success() const { return exit_code() == 0; }

int ExitReport::exit_code() const {
  // A rank that failed on its own outranks ranks the launcher stopped.
  for (bool aborted : {false, true}) {
    for (const auto& o : outcomes) {
      if (o.aborted == aborted && !o.status.success()) return o.status.shell_code();
    }
  }
  return 0;
}

std::map<int, process::ExitStatus> ExitReport::by_rank() const {
  std::map<int, process::ExitStatus> out;
  for (const auto& o : outcomes) {
    for (int r = o.first_rank; r <= o.last_rank; ++r) out[r] = o.status;
  }
  return out;
}

Placement plan(const LaunchConfig& config) {
  Placement placement = assign_ranks(config.machines, config.np);
  assign_ports(placement, config.conf_port_base());
  return placement;
}

process::EnvList child_environment(const LaunchConfig& config, const PlacementEntry& entry,
                                   const std::filesystem::path& conf_path) {
  process::EnvList env = config.extra_env;
  auto set = [&env](const std::string& k, const std::string& v) {
    for (auto& kv : env) {
      if (kv.first == k) {
        kv.second = v;
        return;
      }
    }
    env.emplace_back(k, v);
  };
  bool cluster = config.mode == Mode::cluster;
  set("MPX_RANK", std::to_string(cluster ? entry.rank : 0));
  set("MPX_SIZE", std::to_string(config.np));
  set("MPX_MODE", std::string(to_string(config.mode)));
  set("MPX_CONF", conf_path.string());
  if (config.debug()) {
    set("MPX_DEBUG_PORT", std::to_string(cluster ? entry.effective_port() : *config.debug_port_base));
    set("MPX_DEBUG_SUSPEND", config.suspend_on_start ? "1" : "0");
  }
  set("MPX_PROFILE", config.profile ? "1" : "0");
  set("MPX_TRACE", config.trace ? "1" : "0");
  // Cluster ranks profile as node <rank>; a multicore process stays node 0.
  if (config.profile && cluster) set("MPX_PROF_NODE", std::to_string(entry.rank));
  set("MPX_PROF_DIR", std::filesystem::absolute(config.profile_dir).string());
  return env;
}

std::vector<std::string> child_command(const LaunchConfig& config, const PlacementEntry& entry,
                                       const process::EnvList& env) {
  if (config.remote_exec.empty()) return config.program;
  std::vector<std::string> argv;
  for (auto tok : text::split_ws(config.remote_exec)) {
    std::string t(tok);
    for (auto pos = t.find("{host}"); pos != std::string::npos; pos = t.find("{host}")) {
      t.replace(pos, 6, entry.node_address);
    }
    argv.push_back(std::move(t));
  }
  argv.emplace_back("env");
  for (const auto& [k, v] : env) argv.push_back(k + "=" + v);
  argv.insert(argv.end(), config.program.begin(), config.program.end());
  return argv;
}

ProcessSet spawn(const LaunchConfig& config, const Placement& placement,
                 const std::filesystem::path& conf_path) {
  ProcessSet set;
  auto start = [&](const PlacementEntry& entry, int first, int last, std::string label) {
    process::SpawnSpec spec;
    spec.env = child_environment(config, entry, conf_path);
    spec.argv = child_command(config, entry, spec.env);
    spec.die_with_parent = true;
    try {
      set.processes.push_back({first, last, std::move(label), process::spawn(spec)});
    } catch (const Error& e) {
      fail(ErrorKind::launch, "rank " + std::to_string(first) + ": " + e.what());
    }
  };
  if (config.mode == Mode::multicore) {
    std::string label = config.np == 1 ? "[rank 0] " : "[rank 0-" + std::to_string(config.np - 1) + "] ";
    start(placement.entries.front(), 0, config.np - 1, label);
  } else {
    for (const auto& entry : placement.entries) {
      start(entry, entry.rank, entry.rank, "[rank " + std::to_string(entry.rank) + "] ");
    }
  }
  return set;
}

namespace {

void forward_lines(int fd, const std::string& label, std::ostream& sink, std::mutex& sink_mutex) {
  std::string pending;
  char buf[4096];
  auto emit = [&](std::string_view line) {
    std::lock_guard lock(sink_mutex);
    sink << label << line << '\n';
    sink.flush();
  };
  while (true) {
    ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    pending.append(buf, static_cast<size_t>(n));
    size_t pos;
    while ((pos = pending.find('\n')) != std::string::npos) {
      emit(std::string_view(pending).substr(0, pos));
      pending.erase(0, pos + 1);
    }
  }
  if (!pending.empty()) emit(pending);
  ::close(fd);
}

}  // namespace

ExitReport monitor(ProcessSet& procs, std::ostream& out, std::ostream& err, std::chrono::milliseconds abort_grace) {
  using clock = std::chrono::steady_clock;
  std::mutex sink_mutex;
  std::vector<std::thread> readers;
  for (auto& p : procs.processes) {
    int out_fd = p.child.take_stdout();
    int err_fd = p.child.take_stderr();
    if (out_fd >= 0) readers.emplace_back(forward_lines, out_fd, p.label, std::ref(out), std::ref(sink_mutex));
    if (err_fd >= 0) readers.emplace_back(forward_lines, err_fd, p.label, std::ref(err), std::ref(sink_mutex));
  }

  std::vector<std::optional<process::ExitStatus>> status(procs.processes.size());
  std::vector<bool> aborted(procs.processes.size(), false);
  std::optional<clock::time_point> term_at;
  std::optional<clock::time_point> kill_at;
  std::size_t remaining = procs.processes.size();
  while (remaining > 0) {
    for (std::size_t i = 0; i < procs.processes.size(); ++i) {
      if (status[i]) continue;
      status[i] = procs.processes[i].child.try_wait();
      if (!status[i]) continue;
      --remaining;
      if (!status[i]->success() && !term_at && !aborted[i]) term_at = clock::now() + abort_grace;
    }
    auto now = clock::now();
    if (term_at && now >= *term_at && !kill_at) {
      for (std::size_t i = 0; i < status.size(); ++i) {
        if (status[i]) continue;
        aborted[i] = true;
        procs.processes[i].child.kill(SIGTERM);
      }
      kill_at = now + std::chrono::seconds(1);
    }
    if (kill_at && now >= *kill_at) {
      for (std::size_t i = 0; i < status.size(); ++i) {
        if (!status[i]) procs.processes[i].child.kill(SIGKILL);
      }
    }
    if (remaining > 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  for (auto& t : readers) t.join();

  ExitReport report;
  for (std::size_t i = 0; i < procs.processes.size(); ++i) {
    const auto& p = procs.processes[i];
    report.outcomes.push_back({p.first_rank, p.last_rank, *status[i], aborted[i]});
  }
  return report;
}

int launch(const LaunchConfig& config, std::ostream& out, std::ostream& err) {
  Placement placement = plan(config);
  auto conf_path = std::filesystem::absolute(config.conf_path);
  write_conf(placement, conf_path);
  if (config.profile) {
    std::error_code ec;
    std::filesystem::create_directories(config.profile_dir, ec);
  }
  ProcessSet procs = spawn(config, placement, conf_path);
  ExitReport report = monitor(procs, out, err, config.abort_grace);
  for (const auto& o : report.outcomes) {
    if (o.status.success()) continue;
    std::string who = o.first_rank == o.last_rank
                          ? "rank " + std::to_string(o.first_rank)
                          : "ranks " + std::to_string(o.first_rank) + "-" + std::to_string(o.last_rank);
    err << "mpxrun: " << who << " " << o.status.describe() << (o.aborted ? " (stopped after another rank failed)" : "")
        << '\n';
  }
  err.flush();
  return report.exit_code();
}

}  // namespace mpx::launcher
