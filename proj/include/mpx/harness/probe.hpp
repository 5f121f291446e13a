#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace mpx {

using ThreadIndex = std::uint32_t;

/// Dense per-process thread index, assigned on first call from each thread.
ThreadIndex current_thread_index();

/// (index, native id) pairs for every thread that has an index.
std::vector<std::pair<ThreadIndex, std::uint64_t>> thread_table();

}  // namespace mpx

namespace mpx::probe {

enum class Kind { enter, exit };

std::string_view to_string(Kind kind);

struct Site {
  std::string_view name;
  Kind kind = Kind::enter;
  ThreadIndex thread = 0;
  std::int64_t timestamp_us = 0;
};

class Sink {
 public:
  virtual ~Sink() = default;
  virtual void on_probe(const Site& site) = 0;
};

enum class Slot { debug, profiler, observer };

/// Installs a process-wide sink (nullptr removes it). The caller keeps the
/// sink alive until it is removed.
void install(Slot slot, Sink* sink);
bool installed(Slot slot);

/// Debug sink for the calling thread only; takes precedence over the
/// process-wide debug sink. Multicore ranks use this to reach their own agent.
void set_thread_debug_sink(Sink* sink);

/// Skips the profiler sink for probes on the calling thread while set. Only
/// toggle between scopes, never inside one, so enter/exit stay balanced.
void set_thread_profiler_paused(bool paused);

/// Monotonic clock in integer microseconds.
std::int64_t now_us();

/// Dispatch order: enter runs the debug checkpoint, then the profiler;
/// exit runs the profiler, then the debug checkpoint. Observers run last.
void emit(std::string_view name, Kind kind);

/// RAII probe: enter on construction, exit on destruction (including unwind).
/// `name` must outlive the scope.
class Scope {
 public:
  explicit Scope(std::string_view name);
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;

 private:
  std::string_view name_;
};

template <class Body>
decltype(auto) probe_scope(std::string_view name, Body&& body) {
  Scope scope(name);
  return std::forward<Body>(body)();
}

}  // namespace mpx::probe
