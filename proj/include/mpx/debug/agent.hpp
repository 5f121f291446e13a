#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mpx/debug/state.hpp"
#include "mpx/harness/inspect.hpp"
#include "mpx/harness/probe.hpp"
#include "mpx/net.hpp"

namespace mpx::debug {

/// Exit status of a rank whose agent cannot bind its port (EADDRINUSE on Linux).
inline constexpr int agent_bind_failure_exit = 98;

struct AgentOptions {
  std::uint16_t port = 0;
  bool suspend_on_start = false;
  bool server = true;  // listen for the client; connect-out is not supported
  std::string bind_address = "0.0.0.0";
};

/// In-process MDWP server for one rank. Installed as the debug probe sink;
/// application threads block inside on_probe() while suspended.
class DebugAgent final : public probe::Sink {
 public:
  DebugAgent(int rank, int size, AgentOptions options,
             std::shared_ptr<const InspectableRegistry> inspectables);
  ~DebugAgent() override;

  DebugAgent(const DebugAgent&) = delete;
  DebugAgent& operator=(const DebugAgent&) = delete;

  /// Registers a thread before start() so a start-up hold covers it.
  void register_thread(ThreadIndex thread);

  /// Binds and starts the service thread. A bound port raises an io error
  /// whose message contains "address already in use".
  void start();

  void on_probe(const probe::Site& site) override;

  /// Sends `EVT EXIT <code>` to an attached client and stops serving.
  void shutdown(int exit_code);

  std::uint16_t port() const { return options_.port; }
  int rank() const { return state_.rank(); }

 private:
  void serve();
  void serve_client(net::Socket client);
  void flush_events();
  void write_lines(const std::vector<std::string>& lines);

  AgentOptions options_;
  net::Socket listener_;
  std::thread service_;

  std::mutex state_mutex_;
  std::condition_variable released_;
  DebugState state_;

  std::mutex write_mutex_;  // orders writes to the client; taken before state_mutex_
  net::Socket* client_ = nullptr;
  bool stopping_ = false;
};

}  // namespace mpx::debug
