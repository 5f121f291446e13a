#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mpx/debug/state.hpp"
#include "mpx/launcher/conf_file.hpp"

namespace mpx::debug {

/// Reply to one MDWP command: the `OK`/`ERR` line plus any THREAD/FRAME lines.
/// A transport failure yields the single line "ERR disconnected" and a
/// command that got no reply in time yields "ERR timeout".
struct Response {
  std::vector<std::string> lines;

  bool ok() const;
  /// Text after "OK " on the first line, empty otherwise.
  std::string payload() const;
};

/// One entry of the session's event log. Agent events carry the EVT kind
/// (HIT, SUSPENDED, THREAD_START, EXIT). The session adds its own records
/// when the mirror changes: STATE (thread, state), BREAKPOINTS (names...),
/// FRAMES (thread, names...) and DISCONNECTED.
struct EventRecord {
  std::uint64_t seq = 0;
  std::int64_t ts_us = 0;  // since the session was created
  int rank = 0;
  std::string kind;
  std::vector<std::string> args;
  bool from_agent = false;

  /// "EVT <kind> <args...>" as sent by the agent.
  std::string line() const;
};

struct ThreadView {
  RunState state = RunState::running;
  std::vector<std::string> frames;  // innermost first; empty unless known

  friend bool operator==(const ThreadView&, const ThreadView&) = default;
};

struct RankView {
  int rank = 0;
  int size = 0;
  std::string address;
  std::uint16_t port = 0;
  bool connected = false;
  std::optional<int> exit_code;
  std::map<ThreadIndex, ThreadView> threads;
  std::set<std::string> breakpoints;
};

struct SessionOptions {
  std::chrono::milliseconds connect_timeout{10000};
  std::chrono::milliseconds command_timeout{30000};
};

/// Connections to every rank listed in a conf file, one reader thread per
/// rank, and a mirror of each rank's debug state kept current from replies
/// and events.
class Session {
 public:
  /// Connects (retrying until the agents listen), exchanges HELLO and reads
  /// the thread table. Throws attach error naming the rank that could not be
  /// reached, or protocol error when HELLO disagrees with the conf file.
  static std::unique_ptr<Session> attach_all(const launcher::ConfFile& conf, SessionOptions options = {});

  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  int size() const { return static_cast<int>(connections_.size()); }

  /// Throws argument error for an unknown rank or a line containing LF.
  Response command(int rank, const std::string& line);
  /// Sends to every rank before collecting; failures are per-rank data.
  std::map<int, Response> broadcast(const std::string& line);

  std::vector<RankView> mirror() const;
  std::vector<EventRecord> events() const;
  /// Events with seq >= `from`; waits up to `wait` when there are none.
  std::vector<EventRecord> events_since(std::uint64_t from, std::chrono::milliseconds wait) const;

  /// Blocks until `ready(events, mirror)` holds or the timeout passes.
  bool wait_for(const std::function<bool(const std::vector<EventRecord>&, const std::vector<RankView>&)>& ready,
                std::chrono::milliseconds timeout) const;

  /// True once every rank has reported EXIT or dropped its connection.
  bool finished() const;

  /// Sends DETACH to every live rank and closes the connections.
  void detach_all();

 private:
  struct Pending;
  struct Connection;

  explicit Session(SessionOptions options);
  void connect_rank(const launcher::ConfRecord& record);
  void read_loop(Connection& conn);
  std::shared_ptr<Pending> submit(Connection& conn, const std::string& line);
  Response await(const std::shared_ptr<Pending>& pending);
  Connection& connection(int rank);

  // Mirror updates; mutex_ held.
  void on_event_line(int rank, const std::string& line);
  void on_response(int rank, const std::string& command, const Response& response);
  void on_disconnect(Connection& conn);
  void set_thread_state(int rank, ThreadIndex thread, RunState state);
  void set_frames(int rank, ThreadIndex thread, std::vector<std::string> frames);
  void record(int rank, std::string kind, std::vector<std::string> args, bool from_agent);

  SessionOptions options_;
  std::chrono::steady_clock::time_point epoch_;
  std::vector<std::unique_ptr<Connection>> connections_;

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::vector<RankView> mirror_;
  std::vector<EventRecord> log_;
};

}  // namespace mpx::debug
