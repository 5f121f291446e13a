#include "mpx/debug/state.hpp"

#include "mpx/text.hpp"

namespace mpx::debug {

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::running: return "RUNNING";
    case RunState::suspend_requested: return "SUSPEND_REQUESTED";
    case RunState::suspended: return "SUSPENDED";
    case RunState::stepping: return "STEPPING";
  }
  return "RUNNING";
}

std::optional<RunState> parse_run_state(std::string_view text) {
  for (auto s : {RunState::running, RunState::suspend_requested, RunState::suspended, RunState::stepping}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

DebugState::DebugState(int rank, int size, std::shared_ptr<const InspectableRegistry> inspectables,
                       bool suspend_on_start)
    : rank_(rank), size_(size), inspectables_(std::move(inspectables)), start_hold_(suspend_on_start) {}

DebugState::ThreadInfo& DebugState::thread_info(ThreadIndex thread) {
  auto [it, inserted] = threads_.try_emplace(thread);
  if (inserted) {
    it->second.state = start_hold_ ? RunState::suspend_requested : RunState::running;
    push_event("EVT THREAD_START " + std::to_string(thread) + " " + std::string(to_string(it->second.state)));
  }
  return it->second;
}

void DebugState::register_thread(ThreadIndex thread) { thread_info(thread); }

bool DebugState::arrive(const probe::Site& site) {
  ThreadInfo& t = thread_info(site.thread);
  if (site.kind == probe::Kind::enter) t.frames.emplace_back(site.name);

  bool hit = site.kind == probe::Kind::enter && breakpoints_.count(site.name) != 0;
  if (hit) {
    t.state = RunState::suspended;
    push_event("EVT HIT " + std::string(site.name) + " " + std::to_string(site.thread) + " " +
               std::string(probe::to_string(site.kind)));
    return true;
  }
  if (t.state == RunState::suspend_requested || t.state == RunState::stepping) {
    t.state = RunState::suspended;
    push_event("EVT SUSPENDED " + std::to_string(site.thread));
    return true;
  }
  return false;
}

void DebugState::depart(const probe::Site& site) {
  auto it = threads_.find(site.thread);
  if (it == threads_.end()) return;
  if (site.kind == probe::Kind::exit && !it->second.frames.empty()) it->second.frames.pop_back();
}

void DebugState::resume_all() {
  for (auto& [id, t] : threads_) t.state = RunState::running;
  start_hold_ = false;
}

void DebugState::detach() {
  breakpoints_.clear();
  resume_all();
}

std::vector<std::string> DebugState::take_events() {
  std::vector<std::string> out(std::make_move_iterator(events_.begin()),
                               std::make_move_iterator(events_.end()));
  events_.clear();
  return out;
}

void DebugState::push_event(std::string line) { events_.push_back(std::move(line)); }

RunState DebugState::state(ThreadIndex thread) const {
  auto it = threads_.find(thread);
  return it == threads_.end() ? RunState::running : it->second.state;
}

std::vector<std::string> DebugState::stack(ThreadIndex thread) const {
  auto it = threads_.find(thread);
  if (it == threads_.end()) return {};
  return {it->second.frames.rbegin(), it->second.frames.rend()};
}

namespace {

std::optional<ThreadIndex> parse_thread(std::string_view token) {
  auto v = text::parse_int(token);
  if (!v || *v < 0 || *v > 0xffffffffLL) return std::nullopt;
  return static_cast<ThreadIndex>(*v);
}

std::string escape_value(const std::string& value) {
  std::string out;
  for (char c : value) {
    if (c == '\n') {
      out += "\\n";
    } else if (c == '\r') {
      out += "\\r";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> DebugState::handle(std::string_view line) {
  static const std::vector<std::string> err_parse{"ERR parse"};
  static const std::vector<std::string> ok{"OK"};

  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto space = line.find(' ');
  std::string_view verb = line.substr(0, space);
  std::string_view arg = space == std::string_view::npos ? std::string_view{} : line.substr(space + 1);
  auto args = text::split_ws(arg);

  auto known_thread = [&](std::string_view token, std::vector<std::string>& error) -> std::optional<ThreadIndex> {
    auto t = parse_thread(token);
    if (!t) {
      error = err_parse;
      return std::nullopt;
    }
    if (!has_thread(*t)) {
      error = {"ERR unknown-thread"};
      return std::nullopt;
    }
    return t;
  };

  if (verb == "HELLO" && args.empty()) {
    return {"OK rank " + std::to_string(rank_) + " size " + std::to_string(size_)};
  }
  if (verb == "THREADS" && args.empty()) {
    std::vector<std::string> out{"OK " + std::to_string(threads_.size())};
    for (const auto& [id, t] : threads_) {
      out.push_back("THREAD " + std::to_string(id) + " " + std::string(to_string(t.state)));
    }
    return out;
  }
  if ((verb == "BREAK" || verb == "CLEAR") && !text::trim(arg).empty()) {
    std::string name(text::trim(arg));
    if (verb == "BREAK") {
      breakpoints_.insert(name);
    } else {
      breakpoints_.erase(name);
    }
    return ok;
  }
  if (verb == "SUSPEND" && args.empty()) {
    for (auto& [id, t] : threads_) {
      if (t.state == RunState::running) t.state = RunState::suspend_requested;
    }
    return ok;
  }
  if (verb == "RESUME" && args.size() <= 1) {
    if (args.empty()) {
      resume_all();
      return ok;
    }
    std::vector<std::string> error;
    auto t = known_thread(args[0], error);
    if (!t) return error;
    threads_[*t].state = RunState::running;
    return ok;
  }
  if (verb == "STEP" && args.size() == 1) {
    std::vector<std::string> error;
    auto t = known_thread(args[0], error);
    if (!t) return error;
    auto& info = threads_[*t];
    if (info.state != RunState::suspended) return {"ERR not-suspended"};
    info.state = RunState::stepping;
    return ok;
  }
  if (verb == "STACK" && args.size() == 1) {
    std::vector<std::string> error;
    auto t = known_thread(args[0], error);
    if (!t) return error;
    const auto& info = threads_[*t];
    if (info.state != RunState::suspended) return {"ERR not-suspended"};
    std::vector<std::string> out{"OK " + std::to_string(info.frames.size())};
    for (auto it = info.frames.rbegin(); it != info.frames.rend(); ++it) out.push_back("FRAME " + *it);
    return out;
  }
  if (verb == "INSPECT" && args.size() == 1) {
    auto entry = inspectables_ ? inspectables_->find(std::string(args[0])) : std::nullopt;
    if (!entry) return {"ERR unknown-inspectable"};
    if (state(entry->owner) != RunState::suspended) return {"ERR not-suspended"};
    return {"OK " + escape_value(entry->provider())};
  }
  if (verb == "DETACH" && args.empty()) {
    detach();
    return ok;
  }
  return err_parse;
}

}  // namespace mpx::debug
