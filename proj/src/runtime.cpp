#include "mpx/runtime.hpp"

#include <cstdlib>
#include <future>
#include <iostream>
#include <thread>

#include "mpx/debug/agent.hpp"
#include "mpx/error.hpp"
#include "mpx/launcher/conf_file.hpp"
#include "mpx/prof/profiler.hpp"
#include "mpx/text.hpp"

namespace mpx {

namespace {

struct DebugSettings {
  bool enabled = false;
  int base_port = 0;
  bool suspend = false;
};

DebugSettings debug_settings() {
  DebugSettings s;
  auto port = getenv_or("MPX_DEBUG_PORT");
  if (port.empty()) return s;
  auto v = text::parse_int(port);
  if (!v || *v < 1024 || *v > 65535) fail(ErrorKind::config, "MPX_DEBUG_PORT invalid: " + port);
  s.enabled = true;
  s.base_port = static_cast<int>(*v);
  s.suspend = getenv_or("MPX_DEBUG_SUSPEND") == "1";
  return s;
}

std::uint16_t agent_port(const Environment& env, const DebugSettings& debug, int rank) {
  if (env.mode == Mode::cluster) return static_cast<std::uint16_t>(debug.base_port);
  // Multicore: every rank has its own agent; the conf file is authoritative
  // when present, otherwise use the single-node stride.
  if (!env.conf_path.empty()) {
    std::error_code ec;
    if (std::filesystem::exists(env.conf_path, ec)) {
      auto conf = launcher::ConfFile::read(env.conf_path);
      if (rank < conf.size()) return conf.for_rank(rank).port;
    }
  }
  long port = debug.base_port + 2L * rank;
  if (port > 65535) fail(ErrorKind::config, "debug port for rank " + std::to_string(rank) + " exceeds 65535");
  return static_cast<std::uint16_t>(port);
}

int run_rank_body(CommContext& ctx, const RankMain& rank_main) {
  try {
    return rank_main(ctx);
  } catch (const std::exception& e) {
    std::cerr << "mpx: rank " << ctx.rank() << ": " << e.what() << std::endl;
    return 1;
  }
}

/// Sets up one rank on the calling thread, runs it, tears it down.
class RankSession {
 public:
  RankSession(const Environment& env, const DebugSettings& debug, prof::Profiler* profiler,
              std::shared_ptr<MulticoreFabric> fabric)
      : ctx_(init(env, std::move(fabric))) {
    ThreadIndex thread = current_thread_index();
    if (profiler != nullptr) profiler->register_thread(thread);
    if (debug.enabled) {
      debug::AgentOptions options;
      options.port = agent_port(env, debug, env.rank);
      options.suspend_on_start = debug.suspend;
      agent_ = std::make_unique<debug::DebugAgent>(env.rank, env.size, options, ctx_.inspectables());
      agent_->register_thread(thread);
      try {
        agent_->start();
      } catch (const Error& e) {
        std::cerr << "mpx: error: " << e.what() << std::endl;
        std::_Exit(debug::agent_bind_failure_exit);
      }
      probe::set_thread_debug_sink(agent_.get());
    }
  }

  int run(const RankMain& rank_main) {
    int code = run_rank_body(ctx_, rank_main);
    ctx_.finalize();
    if (agent_) {
      probe::set_thread_debug_sink(nullptr);
      agent_->shutdown(code);
    }
    return code;
  }

 private:
  CommContext ctx_;
  std::unique_ptr<debug::DebugAgent> agent_;
};

}  // namespace

int run(const RankMain& rank_main) {
  try {
    return run(Environment::from_process_env(), rank_main);
  } catch (const Error& e) {
    std::cerr << "mpx: " << e.what() << std::endl;
    return 2;
  }
}

int run(const Environment& env, const RankMain& rank_main) {
  DebugSettings debug = debug_settings();
  std::unique_ptr<prof::Profiler> profiler = prof::Profiler::from_process_env();
  if (profiler) probe::install(probe::Slot::profiler, profiler.get());

  std::vector<int> codes(static_cast<size_t>(env.size), 0);
  if (env.mode == Mode::multicore) {
    auto fabric = make_multicore_fabric(env.size);
    std::vector<std::thread> threads;
    for (int r = 0; r < env.size; ++r) {
      // Ranks start one after another so thread indices follow rank order.
      std::promise<void> ready;
      auto started = ready.get_future();
      threads.emplace_back([&, r, ready = std::move(ready)]() mutable {
        Environment rank_env = env;
        rank_env.rank = r;
        std::optional<RankSession> session;
        try {
          session.emplace(rank_env, debug, profiler.get(), fabric);
        } catch (const std::exception& e) {
          std::cerr << "mpx: rank " << r << ": " << e.what() << std::endl;
          codes[static_cast<size_t>(r)] = 2;
          ready.set_value();
          return;
        }
        ready.set_value();
        codes[static_cast<size_t>(r)] = session->run(rank_main);
      });
      started.wait();
    }
    for (auto& t : threads) t.join();
  } else {
    RankSession session(env, debug, profiler.get(), nullptr);
    codes[static_cast<size_t>(env.rank)] = session.run(rank_main);
  }

  int result = 0;
  for (int c : codes) {
    if (c != 0) {
      result = c;
      break;
    }
  }
  if (profiler) {
    probe::install(probe::Slot::profiler, nullptr);
    try {
      profiler->flush();
    } catch (const Error& e) {
      std::cerr << "mpx: " << e.what() << std::endl;
      if (result == 0) result = 2;
    }
  }
  return result;
}

}  // namespace mpx
