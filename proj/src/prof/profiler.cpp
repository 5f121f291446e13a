#include "mpx/prof/profiler.hpp"

#include <unistd.h>

#include <cstdlib>
#include <fstream>

#include "mpx/error.hpp"
#include "mpx/text.hpp"

namespace mpx::prof {

void ThreadAccount::note_time(std::int64_t ts_us) {
  if (!first_ts_) {
    first_ts_ = ts_us;
    last_ts_ = ts_us;
  }
  if (ts_us < last_ts_) {
    if (error_.empty()) error_ = "timestamp went backwards at " + std::to_string(ts_us);
    ts_us = last_ts_;
  }
  last_ts_ = ts_us;
}

void ThreadAccount::enter(std::string_view name, std::int64_t ts_us) {
  note_time(ts_us);
  auto it = totals_.find(name);
  if (it == totals_.end()) it = totals_.emplace(std::string(name), Totals{}).first;
  it->second.active += 1;
  frames_.push_back({it->first, &it->second, last_ts_, 0});
}

void ThreadAccount::close_top(std::int64_t ts_us) {
  Frame f = frames_.back();
  frames_.pop_back();
  std::int64_t incl = ts_us - f.start;
  f.totals->calls += 1;
  f.totals->excl_us += incl - f.child_us;
  f.totals->active -= 1;
  if (f.totals->active == 0) f.totals->incl_us += incl;
  if (!frames_.empty()) {
    frames_.back().child_us += incl;
    frames_.back().totals->subrs += 1;
  } else {
    root_child_us_ += incl;
    root_subrs_ += 1;
  }
}

void ThreadAccount::exit(std::string_view name, std::int64_t ts_us) {
  note_time(ts_us);
  if (frames_.empty() || frames_.back().name != name) {
    if (error_.empty()) {
      error_ = "unbalanced exit of '" + std::string(name) + "' at " + std::to_string(ts_us);
    }
    return;
  }
  close_top(last_ts_);
}

std::vector<FunctionStats> ThreadAccount::snapshot() const {
  if (!first_ts_) return {};
  ThreadAccount copy = *this;
  // Frames point into the copied map; rebind them.
  for (auto& f : copy.frames_) {
    auto it = copy.totals_.find(f.name);
    f.name = it->first;
    f.totals = &it->second;
  }
  while (!copy.frames_.empty()) copy.close_top(copy.last_ts_);

  std::vector<FunctionStats> out;
  out.reserve(copy.totals_.size() + 1);
  for (const auto& [name, t] : copy.totals_) out.push_back({name, t.calls, t.subrs, t.excl_us, t.incl_us});
  std::int64_t root_incl = copy.last_ts_ - *copy.first_ts_;
  out.push_back({std::string(root_name), 1, copy.root_subrs_, root_incl - copy.root_child_us_, root_incl});
  sort_by_exclusive(out);
  return out;
}

// ---------------------------------------------------------------------------

Profiler::Profiler(ProfileOptions options) : options_(std::move(options)) {
  if (options_.node < 0) fail(ErrorKind::config, "profile node must be >= 0");
  std::error_code ec;
  std::filesystem::create_directories(options_.dir, ec);
  auto probe_file = options_.dir / (".mpx-write-check." + std::to_string(::getpid()));
  {
    std::ofstream out(probe_file);
    if (ec || !out) fail(ErrorKind::io, "profile directory not writable: " + options_.dir.string());
  }
  std::filesystem::remove(probe_file, ec);
}

Profiler::~Profiler() = default;

std::unique_ptr<Profiler> Profiler::from_variables(const std::map<std::string, std::string>& vars) {
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = vars.find(key);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
  if (get("MPX_PROFILE").value_or("0") != "1") return nullptr;
  ProfileOptions options;
  if (auto node = get("MPX_PROF_NODE")) {
    auto v = text::parse_int(*node);
    if (!v || *v < 0 || *v > 0x7fffffff) fail(ErrorKind::config, "MPX_PROF_NODE invalid: " + *node);
    options.node = static_cast<int>(*v);
  }
  if (auto dir = get("MPX_PROF_DIR"); dir && !dir->empty()) options.dir = *dir;
  options.trace = get("MPX_TRACE").value_or("0") == "1";
  return std::make_unique<Profiler>(std::move(options));
}

std::unique_ptr<Profiler> Profiler::from_process_env() {
  std::map<std::string, std::string> vars;
  for (const char* key : {"MPX_PROFILE", "MPX_TRACE", "MPX_PROF_NODE", "MPX_PROF_DIR"}) {
    if (const char* v = std::getenv(key)) vars.emplace(key, v);
  }
  return from_variables(vars);
}

Profiler::ThreadState& Profiler::state_for(ThreadIndex thread) {
  if (thread >= max_threads) fail(ErrorKind::argument, "thread index beyond profiler capacity");
  ThreadState* s = threads_[thread].load(std::memory_order_acquire);
  if (s != nullptr) return *s;
  std::lock_guard lock(create_mutex_);
  s = threads_[thread].load(std::memory_order_relaxed);
  if (s == nullptr) {
    owned_.push_back(std::make_unique<ThreadState>());
    s = owned_.back().get();
    threads_[thread].store(s, std::memory_order_release);
  }
  return *s;
}

void Profiler::register_thread(ThreadIndex thread) { state_for(thread); }

void Profiler::on_probe(const probe::Site& site) {
  ThreadState& s = state_for(site.thread);
  std::lock_guard lock(s.mutex);
  if (site.kind == probe::Kind::enter) {
    s.account.enter(site.name, site.timestamp_us);
  } else {
    s.account.exit(site.name, site.timestamp_us);
  }
  if (options_.trace) s.trace.push_back({site.timestamp_us, site.thread, site.kind, std::string(site.name)});
}

std::map<ThreadIndex, ProfileData> Profiler::collect() const {
  std::map<ThreadIndex, ProfileData> out;
  auto native = thread_table();
  for (ThreadIndex t = 0; t < max_threads; ++t) {
    ThreadState* s = threads_[t].load(std::memory_order_acquire);
    if (s == nullptr) continue;
    ProfileData data;
    std::lock_guard lock(s->mutex);
    data.functions = s->account.snapshot();
    data.comments.push_back("node " + std::to_string(options_.node) + " context 0 thread " + std::to_string(t));
    for (const auto& [idx, tid] : native) {
      if (idx == t) data.comments.push_back("thread " + std::to_string(t) + " native " + std::to_string(tid));
    }
    if (!s->account.valid()) data.comments.push_back("invalid: " + s->account.error());
    out.emplace(t, std::move(data));
  }
  return out;
}

std::map<ThreadIndex, std::vector<TraceEvent>> Profiler::collect_traces() const {
  std::map<ThreadIndex, std::vector<TraceEvent>> out;
  for (ThreadIndex t = 0; t < max_threads; ++t) {
    ThreadState* s = threads_[t].load(std::memory_order_acquire);
    if (s == nullptr) continue;
    std::lock_guard lock(s->mutex);
    out.emplace(t, s->trace);
  }
  return out;
}

std::vector<std::filesystem::path> Profiler::flush() const {
  std::vector<std::filesystem::path> written;
  auto remove_written = [&] {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
  };
  try {
    for (const auto& [t, data] : collect()) {
      auto path = options_.dir / profile_file_name(identity(t));
      write_file_atomic(path, data.encode());
      written.push_back(path);
    }
    if (options_.trace) {
      for (const auto& [t, events] : collect_traces()) {
        std::string body;
        for (const auto& e : events) {
          body += encode_trace_line(e);
          body += '\n';
        }
        auto path = options_.dir / trace_file_name(identity(t));
        write_file_atomic(path, body);
        written.push_back(path);
      }
    }
  } catch (...) {
    remove_written();
    throw;
  }
  return written;
}

}  // namespace mpx::prof
