#include "mpx/debug/session.hpp"

#include <deque>
#include <thread>

#include "mpx/error.hpp"
#include "mpx/net.hpp"
#include "mpx/text.hpp"

namespace mpx::debug {

bool Response::ok() const { return !lines.empty() && (lines[0] == "OK" || lines[0].rfind("OK ", 0) == 0); }

std::string Response::payload() const {
  if (!ok() || lines[0].size() <= 3) return {};
  return lines[0].substr(3);
}

std::string EventRecord::line() const {
  std::string out = "EVT " + kind;
  for (const auto& a : args) out += " " + a;
  return out;
}

struct Session::Pending {
  std::string line;
  std::string verb;
  std::optional<Response> result;
};

struct Session::Connection {
  int rank = 0;
  net::Socket socket;
  std::thread reader;
  std::mutex send_mutex;
  // Guarded by Session::mutex_.
  bool alive = false;
  std::deque<std::shared_ptr<Pending>> pending;
  std::shared_ptr<Pending> collecting;
  Response partial;
  std::size_t remaining = 0;
};

namespace {

Response single(std::string line) { return Response{{std::move(line)}}; }

std::optional<ThreadIndex> thread_arg(std::string_view token) {
  auto v = text::parse_int(token);
  if (!v || *v < 0 || *v > 0xffffffffLL) return std::nullopt;
  return static_cast<ThreadIndex>(*v);
}

bool multi_line(const std::string& verb) { return verb == "THREADS" || verb == "STACK"; }

}  // namespace

Session::Session(SessionOptions options) : options_(options), epoch_(std::chrono::steady_clock::now()) {}

Session::~Session() {
  for (auto& c : connections_) c->socket.shutdown();
  for (auto& c : connections_) {
    if (c->reader.joinable()) c->reader.join();
  }
}

std::unique_ptr<Session> Session::attach_all(const launcher::ConfFile& conf, SessionOptions options) {
  if (conf.records.empty()) fail(ErrorKind::attach, "conf file lists no ranks");
  std::unique_ptr<Session> session(new Session(options));
  for (const auto& rec : conf.records) {
    RankView view;
    view.rank = rec.rank;
    view.address = rec.address;
    view.port = rec.port;
    session->mirror_.push_back(std::move(view));
  }
  for (const auto& rec : conf.records) session->connect_rank(rec);

  // HELLO and THREADS go out to every rank before any reply is awaited.
  std::vector<std::shared_ptr<Pending>> hellos;
  for (auto& c : session->connections_) hellos.push_back(session->submit(*c, "HELLO"));
  for (std::size_t i = 0; i < hellos.size(); ++i) {
    const auto& rec = conf.records[i];
    Response r = session->await(hellos[i]);
    std::string who = "rank " + std::to_string(rec.rank);
    if (!r.ok()) fail(ErrorKind::attach, who + " (" + rec.address + ":" + std::to_string(rec.port) + "): " + r.lines[0]);
    auto tok = text::split_ws(r.payload());
    auto reported = tok.size() == 4 && tok[0] == "rank" && tok[2] == "size" ? text::parse_int(tok[1]) : std::nullopt;
    auto size = tok.size() == 4 ? text::parse_int(tok[3]) : std::nullopt;
    if (!reported || !size) fail(ErrorKind::protocol, who + ": malformed HELLO reply: " + r.lines[0]);
    if (*reported != rec.rank) {
      fail(ErrorKind::protocol, who + ": agent reports rank " + std::to_string(*reported));
    }
  }
  session->broadcast("THREADS");
  return session;
}

void Session::connect_rank(const launcher::ConfRecord& record) {
  auto conn = std::make_unique<Connection>();
  conn->rank = record.rank;
  try {
    conn->socket = net::connect(record.address, record.port, options_.connect_timeout);
  } catch (const Error& e) {
    fail(ErrorKind::attach, "rank " + std::to_string(record.rank) + " (" + record.address + ":" +
                                std::to_string(record.port) + "): " + e.what());
  }
  {
    std::lock_guard lock(mutex_);
    conn->alive = true;
    mirror_[static_cast<std::size_t>(record.rank)].connected = true;
  }
  Connection& ref = *conn;
  connections_.push_back(std::move(conn));
  ref.reader = std::thread([this, &ref] { read_loop(ref); });
}

Session::Connection& Session::connection(int rank) {
  if (rank < 0 || rank >= size()) fail(ErrorKind::argument, "no rank " + std::to_string(rank) + " in session");
  return *connections_[static_cast<std::size_t>(rank)];
}

std::shared_ptr<Session::Pending> Session::submit(Connection& conn, const std::string& line) {
  auto p = std::make_shared<Pending>();
  p->line = line;
  auto words = text::split_ws(line);
  p->verb = words.empty() ? "" : std::string(words[0]);

  std::lock_guard send(conn.send_mutex);
  {
    std::lock_guard lock(mutex_);
    if (!conn.alive) {
      p->result = single("ERR disconnected");
      return p;
    }
    conn.pending.push_back(p);
  }
  try {
    net::write_all(conn.socket, line + "\n");
  } catch (const Error&) {
    conn.socket.shutdown();  // the reader fails everything still pending
  }
  return p;
}

Response Session::await(const std::shared_ptr<Pending>& pending) {
  std::unique_lock lock(mutex_);
  if (!changed_.wait_for(lock, options_.command_timeout, [&] { return pending->result.has_value(); })) {
    return single("ERR timeout");
  }
  return *pending->result;
}

Response Session::command(int rank, const std::string& line) {
  if (line.find('\n') != std::string::npos) fail(ErrorKind::argument, "command contains a line break");
  return await(submit(connection(rank), line));
}

std::map<int, Response> Session::broadcast(const std::string& line) {
  if (line.find('\n') != std::string::npos) fail(ErrorKind::argument, "command contains a line break");
  std::vector<std::shared_ptr<Pending>> sent;
  for (auto& c : connections_) sent.push_back(submit(*c, line));
  std::map<int, Response> out;
  for (std::size_t i = 0; i < sent.size(); ++i) out[connections_[i]->rank] = await(sent[i]);
  return out;
}

void Session::read_loop(Connection& conn) {
  net::LineReader reader(conn.socket);
  while (auto line = reader.next()) {
    std::lock_guard lock(mutex_);
    if (line->rfind("EVT ", 0) == 0) {
      on_event_line(conn.rank, *line);
    } else if (conn.collecting) {
      conn.partial.lines.push_back(*line);
      if (--conn.remaining == 0) {
        on_response(conn.rank, conn.collecting->line, conn.partial);
        conn.collecting->result = std::move(conn.partial);
        conn.collecting.reset();
      }
    } else if (!conn.pending.empty()) {
      auto p = conn.pending.front();
      conn.pending.pop_front();
      Response r{{*line}};
      std::size_t count = 0;
      if (multi_line(p->verb) && r.ok()) {
        auto n = text::parse_int(r.payload());
        if (n && *n > 0) count = static_cast<std::size_t>(*n);
      }
      if (count == 0) {
        on_response(conn.rank, p->line, r);
        p->result = std::move(r);
      } else {
        conn.collecting = p;
        conn.partial = std::move(r);
        conn.remaining = count;
      }
    }
    // Anything else is an unsolicited line with no command waiting; dropped.
    changed_.notify_all();
  }
  std::lock_guard lock(mutex_);
  on_disconnect(conn);
  changed_.notify_all();
}

void Session::record(int rank, std::string kind, std::vector<std::string> args, bool from_agent) {
  EventRecord e;
  e.seq = log_.size();
  e.ts_us = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch_).count();
  e.rank = rank;
  e.kind = std::move(kind);
  e.args = std::move(args);
  e.from_agent = from_agent;
  log_.push_back(std::move(e));
}

void Session::set_thread_state(int rank, ThreadIndex thread, RunState state) {
  auto& view = mirror_[static_cast<std::size_t>(rank)];
  auto [it, inserted] = view.threads.try_emplace(thread);
  if (!inserted && it->second.state == state) return;
  it->second.state = state;
  if (state != RunState::suspended && !it->second.frames.empty()) set_frames(rank, thread, {});
  record(rank, "STATE", {std::to_string(thread), std::string(to_string(state))}, false);
}

void Session::set_frames(int rank, ThreadIndex thread, std::vector<std::string> frames) {
  auto& t = mirror_[static_cast<std::size_t>(rank)].threads[thread];
  if (t.frames == frames) return;
  t.frames = std::move(frames);
  std::vector<std::string> args{std::to_string(thread)};
  args.insert(args.end(), t.frames.begin(), t.frames.end());
  record(rank, "FRAMES", std::move(args), false);
}

void Session::on_event_line(int rank, const std::string& line) {
  auto words = text::split_ws(std::string_view(line).substr(4));
  if (words.empty()) return;
  std::vector<std::string> args(words.begin() + 1, words.end());
  std::string kind(words[0]);
  record(rank, kind, args, true);

  auto& view = mirror_[static_cast<std::size_t>(rank)];
  if ((kind == "HIT" && args.size() >= 2) || (kind == "SUSPENDED" && !args.empty())) {
    if (auto t = thread_arg(kind == "HIT" ? args[1] : args[0])) set_thread_state(rank, *t, RunState::suspended);
  } else if (kind == "THREAD_START" && !args.empty()) {
    auto state = args.size() >= 2 ? parse_run_state(args[1]) : std::nullopt;
    if (auto t = thread_arg(args[0])) set_thread_state(rank, *t, state.value_or(RunState::running));
  } else if (kind == "EXIT" && !args.empty()) {
    if (auto code = text::parse_int(args[0])) view.exit_code = static_cast<int>(*code);
  }
}

void Session::on_response(int rank, const std::string& command, const Response& response) {
  if (!response.ok()) return;
  auto& view = mirror_[static_cast<std::size_t>(rank)];
  auto words = text::split_ws(command);
  if (words.empty()) return;
  std::string_view verb = words[0];
  auto breakpoints_changed = [&] {
    record(rank, "BREAKPOINTS", {view.breakpoints.begin(), view.breakpoints.end()}, false);
  };
  auto resume_all = [&] {
    std::vector<ThreadIndex> ids;
    for (const auto& [id, t] : view.threads) ids.push_back(id);
    for (auto id : ids) set_thread_state(rank, id, RunState::running);
  };

  if (verb == "HELLO") {
    auto tok = text::split_ws(response.payload());
    if (tok.size() == 4) view.size = static_cast<int>(text::parse_int(tok[3]).value_or(0));
  } else if (verb == "THREADS") {
    for (std::size_t i = 1; i < response.lines.size(); ++i) {
      auto tok = text::split_ws(response.lines[i]);
      if (tok.size() != 3 || tok[0] != "THREAD") continue;
      auto t = thread_arg(tok[1]);
      auto s = parse_run_state(tok[2]);
      if (t && s) set_thread_state(rank, *t, *s);
    }
  } else if ((verb == "BREAK" || verb == "CLEAR") && words.size() >= 2) {
    std::string name(text::trim(std::string_view(command).substr(verb.size())));
    bool changed = verb == "BREAK" ? view.breakpoints.insert(name).second : view.breakpoints.erase(name) != 0;
    if (changed) breakpoints_changed();
  } else if (verb == "SUSPEND") {
    std::vector<ThreadIndex> ids;
    for (const auto& [id, t] : view.threads) {
      if (t.state == RunState::running) ids.push_back(id);
    }
    for (auto id : ids) set_thread_state(rank, id, RunState::suspend_requested);
  } else if (verb == "RESUME") {
    if (words.size() == 1) {
      resume_all();
    } else if (auto t = thread_arg(words[1])) {
      set_thread_state(rank, *t, RunState::running);
    }
  } else if (verb == "STEP" && words.size() == 2) {
    if (auto t = thread_arg(words[1])) set_thread_state(rank, *t, RunState::stepping);
  } else if (verb == "STACK" && words.size() == 2) {
    std::vector<std::string> frames;
    for (std::size_t i = 1; i < response.lines.size(); ++i) {
      if (response.lines[i].rfind("FRAME ", 0) == 0) frames.push_back(response.lines[i].substr(6));
    }
    if (auto t = thread_arg(words[1])) set_frames(rank, *t, std::move(frames));
  } else if (verb == "DETACH") {
    if (!view.breakpoints.empty()) {
      view.breakpoints.clear();
      breakpoints_changed();
    }
    resume_all();
  }
}

void Session::on_disconnect(Connection& conn) {
  conn.alive = false;
  for (auto& p : conn.pending) p->result = single("ERR disconnected");
  conn.pending.clear();
  if (conn.collecting) {
    conn.collecting->result = single("ERR disconnected");
    conn.collecting.reset();
  }
  auto& view = mirror_[static_cast<std::size_t>(conn.rank)];
  if (view.connected) {
    view.connected = false;
    record(conn.rank, "DISCONNECTED", {}, false);
  }
}

std::vector<RankView> Session::mirror() const {
  std::lock_guard lock(mutex_);
  return mirror_;
}

std::vector<EventRecord> Session::events() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::vector<EventRecord> Session::events_since(std::uint64_t from, std::chrono::milliseconds wait) const {
  std::unique_lock lock(mutex_);
  changed_.wait_for(lock, wait, [&] { return log_.size() > from; });
  if (log_.size() <= from) return {};
  return {log_.begin() + static_cast<std::ptrdiff_t>(from), log_.end()};
}

bool Session::wait_for(
    const std::function<bool(const std::vector<EventRecord>&, const std::vector<RankView>&)>& ready,
    std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return changed_.wait_for(lock, timeout, [&] { return ready(log_, mirror_); });
}

bool Session::finished() const {
  std::lock_guard lock(mutex_);
  for (const auto& v : mirror_) {
    if (v.connected && !v.exit_code) return false;
  }
  return true;
}

void Session::detach_all() {
  std::vector<std::shared_ptr<Pending>> sent;
  for (auto& c : connections_) sent.push_back(submit(*c, "DETACH"));
  for (auto& p : sent) {
    std::unique_lock lock(mutex_);
    changed_.wait_for(lock, std::chrono::seconds(2), [&] { return p->result.has_value(); });
  }
  for (auto& c : connections_) c->socket.shutdown();
}

}  // namespace mpx::debug
