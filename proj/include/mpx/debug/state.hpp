#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mpx/harness/inspect.hpp"
#include "mpx/harness/probe.hpp"

namespace mpx::debug {

enum class RunState { running, suspend_requested, suspended, stepping };

std::string_view to_string(RunState state);
std::optional<RunState> parse_run_state(std::string_view text);

/// MDWP server-side state for one rank, without threads or sockets.
///
/// Every response is a function of the current state and the command line.
/// Application threads report probe sites through arrive()/depart(); when
/// arrive() returns true the caller must block until state(thread) is no
/// longer SUSPENDED, then call depart().
class DebugState {
 public:
  DebugState(int rank, int size, std::shared_ptr<const InspectableRegistry> inspectables,
             bool suspend_on_start = false);

  /// New threads start SUSPEND_REQUESTED while the start-up hold is active.
  void register_thread(ThreadIndex thread);

  /// Checkpoint at a probe site. Enter sites push the frame first; returns
  /// whether the thread is now SUSPENDED.
  bool arrive(const probe::Site& site);
  /// Called after the thread is released; exit sites pop the frame.
  void depart(const probe::Site& site);

  /// Response lines for one command line (without trailing LF).
  std::vector<std::string> handle(std::string_view line);

  /// Client went away (DETACH or disconnect): clear breakpoints, resume all.
  void detach();

  /// Outbound EVT lines queued since the last call, FIFO.
  std::vector<std::string> take_events();
  void push_event(std::string line);
  bool has_events() const { return !events_.empty(); }

  RunState state(ThreadIndex thread) const;
  bool has_thread(ThreadIndex thread) const { return threads_.count(thread) != 0; }
  std::vector<std::string> stack(ThreadIndex thread) const;  // innermost first
  const std::set<std::string, std::less<>>& breakpoints() const { return breakpoints_; }
  bool start_hold() const { return start_hold_; }
  int rank() const { return rank_; }

 private:
  struct ThreadInfo {
    RunState state = RunState::running;
    std::vector<std::string> frames;  // outermost first
  };

  ThreadInfo& thread_info(ThreadIndex thread);
  void resume_all();

  int rank_;
  int size_;
  std::shared_ptr<const InspectableRegistry> inspectables_;
  bool start_hold_;
  std::map<ThreadIndex, ThreadInfo> threads_;
  std::set<std::string, std::less<>> breakpoints_;
  std::deque<std::string> events_;
};

}  // namespace mpx::debug
