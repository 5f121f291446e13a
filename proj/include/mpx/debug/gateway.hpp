#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "mpx/debug/session.hpp"

namespace httplib {
class Server;
}

namespace mpx::debug {

struct GatewayOptions {
  std::string host = "127.0.0.1";
  int port = 0;             // 0 picks a free port
  std::string static_dir;   // served at "/" when set
};

/// HTTP front end for a Session.
///
///     GET  /api/ranks                 mirror snapshot, one object per rank
///     POST /api/ranks/{r}/command     {"cmd": "<MDWP line>"}
///     POST /api/broadcast             {"cmd": "<MDWP line>"}
///     GET  /api/events[?since=N]      server-sent events, one JSON object each
///
/// Event objects are {seq, ts, rank, kind, args, origin}; ts is microseconds
/// since the session started and origin is "agent" or "client".
class Gateway {
 public:
  Gateway(Session& session, GatewayOptions options);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds and serves on a background thread. Throws gateway error when the
  /// port is taken.
  void start();
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  Session& session_;
  GatewayOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

/// JSON text of the snapshot served at /api/ranks.
std::string snapshot_json(const std::vector<RankView>& mirror);
/// JSON text of one event as streamed at /api/events.
std::string event_json(const EventRecord& event);

}  // namespace mpx::debug
