#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mpx/harness/probe.hpp"
#include "mpx/prof/format.hpp"

namespace mpx::prof {

/// Inclusive/exclusive accounting for one thread's enter/exit stream.
///
/// Exclusive time of a frame is its inclusive time minus the inclusive time
/// of its direct children. For recursive functions only the outermost frame
/// adds to inclusive time. A synthetic root spans the first to the last
/// event, so the exclusive times of all functions (root included) sum to the
/// root's inclusive time exactly.
class ThreadAccount {
 public:
  void enter(std::string_view name, std::int64_t ts_us);
  void exit(std::string_view name, std::int64_t ts_us);

  /// Stats with open frames closed at the last event time. Includes the root
  /// entry once any event was seen. Does not modify the account.
  std::vector<FunctionStats> snapshot() const;

  bool empty() const { return !first_ts_.has_value(); }
  bool valid() const { return error_.empty(); }
  const std::string& error() const { return error_; }
  std::size_t depth() const { return frames_.size(); }

 private:
  struct Totals {
    std::int64_t calls = 0;
    std::int64_t subrs = 0;
    std::int64_t excl_us = 0;
    std::int64_t incl_us = 0;
    int active = 0;  // open frames of this function (recursion depth)
  };
  struct Frame {
    std::string_view name;  // points at the key in totals_
    Totals* totals;
    std::int64_t start;
    std::int64_t child_us;
  };
  struct NameHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  };

  void close_top(std::int64_t ts_us);
  void note_time(std::int64_t ts_us);

  std::unordered_map<std::string, Totals, NameHash, std::equal_to<>> totals_;
  std::vector<Frame> frames_;
  std::optional<std::int64_t> first_ts_;
  std::int64_t last_ts_ = 0;
  std::int64_t root_child_us_ = 0;
  std::int64_t root_subrs_ = 0;
  std::string error_;
};

struct ProfileOptions {
  int node = 0;
  std::filesystem::path dir = ".";
  bool trace = false;
};

/// Measurement runtime: a probe sink that keeps one account per thread index
/// and writes `profile.<node>.0.<thread>` (and trace) files on flush.
class Profiler final : public probe::Sink {
 public:
  static constexpr std::size_t max_threads = 1024;

  /// Throws io error when `options.dir` cannot be created or written.
  explicit Profiler(ProfileOptions options);
  ~Profiler() override;

  /// Reads MPX_PROFILE, MPX_TRACE, MPX_PROF_NODE, MPX_PROF_DIR. Returns
  /// nullptr when MPX_PROFILE is not "1".
  static std::unique_ptr<Profiler> from_variables(const std::map<std::string, std::string>& vars);
  static std::unique_ptr<Profiler> from_process_env();

  const ProfileOptions& options() const { return options_; }
  ProfileIdentity identity(ThreadIndex thread) const { return {options_.node, 0, static_cast<int>(thread)}; }

  void on_probe(const probe::Site& site) override;

  /// Makes the thread appear in the output even when it records no events.
  void register_thread(ThreadIndex thread);

  /// Per-thread snapshot keyed by thread index, each sorted by exclusive time.
  std::map<ThreadIndex, ProfileData> collect() const;
  std::map<ThreadIndex, std::vector<TraceEvent>> collect_traces() const;

  /// Writes all files; returns their paths. Idempotent when no new events arrive.
  std::vector<std::filesystem::path> flush() const;

 private:
  struct ThreadState {
    mutable std::mutex mutex;  // uncontended except while flushing
    ThreadAccount account;
    std::vector<TraceEvent> trace;
  };

  ThreadState& state_for(ThreadIndex thread);

  ProfileOptions options_;
  std::array<std::atomic<ThreadState*>, max_threads> threads_{};
  mutable std::mutex create_mutex_;
  std::vector<std::unique_ptr<ThreadState>> owned_;
};

}  // namespace mpx::prof
