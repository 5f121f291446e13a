#include "mpx/harness/probe.hpp"

#include <pthread.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <mutex>

#include "mpx/error.hpp"

namespace mpx {

namespace {

std::mutex g_thread_mutex;
std::vector<std::pair<ThreadIndex, std::uint64_t>> g_threads;

}  // namespace

ThreadIndex current_thread_index() {
  thread_local ThreadIndex index = [] {
    std::lock_guard lock(g_thread_mutex);
    auto idx = static_cast<ThreadIndex>(g_threads.size());
    g_threads.emplace_back(idx, static_cast<std::uint64_t>(::syscall(SYS_gettid)));
    return idx;
  }();
  return index;
}

std::vector<std::pair<ThreadIndex, std::uint64_t>> thread_table() {
  std::lock_guard lock(g_thread_mutex);
  return g_threads;
}

}  // namespace mpx

namespace mpx::probe {

namespace {

std::atomic<Sink*> g_debug{nullptr};
std::atomic<Sink*> g_profiler{nullptr};
std::atomic<Sink*> g_observer{nullptr};
thread_local Sink* tl_debug = nullptr;
thread_local bool tl_profiler_paused = false;

}  // namespace

std::string_view to_string(Kind kind) { return kind == Kind::enter ? "enter" : "exit"; }

void install(Slot slot, Sink* sink) {
  switch (slot) {
    case Slot::debug: g_debug.store(sink, std::memory_order_release); break;
    case Slot::profiler: g_profiler.store(sink, std::memory_order_release); break;
    case Slot::observer: g_observer.store(sink, std::memory_order_release); break;
  }
}

bool installed(Slot slot) {
  switch (slot) {
    case Slot::debug: return g_debug.load(std::memory_order_acquire) != nullptr;
    case Slot::profiler: return g_profiler.load(std::memory_order_acquire) != nullptr;
    case Slot::observer: return g_observer.load(std::memory_order_acquire) != nullptr;
  }
  return false;
}

void set_thread_debug_sink(Sink* sink) { tl_debug = sink; }

void set_thread_profiler_paused(bool paused) { tl_profiler_paused = paused; }

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void emit(std::string_view name, Kind kind) {
  Sink* debug = tl_debug != nullptr ? tl_debug : g_debug.load(std::memory_order_acquire);
  Sink* profiler = tl_profiler_paused ? nullptr : g_profiler.load(std::memory_order_acquire);
  Sink* observer = g_observer.load(std::memory_order_acquire);
  if (debug == nullptr && profiler == nullptr && observer == nullptr) return;

  Site site{name, kind, current_thread_index(), 0};
  if (kind == Kind::enter) {
    if (debug != nullptr) {
      site.timestamp_us = now_us();
      debug->on_probe(site);
    }
    // Re-read the clock so suspension time is not charged to the callee.
    site.timestamp_us = now_us();
    if (profiler != nullptr) profiler->on_probe(site);
  } else {
    site.timestamp_us = now_us();
    if (profiler != nullptr) profiler->on_probe(site);
    if (debug != nullptr) debug->on_probe(site);
  }
  if (observer != nullptr) observer->on_probe(site);
}

Scope::Scope(std::string_view name) : name_(name) {
  if (name.empty()) fail(ErrorKind::argument, "probe name must be non-empty");
  emit(name_, Kind::enter);
}

Scope::~Scope() { emit(name_, Kind::exit); }

}  // namespace mpx::probe
