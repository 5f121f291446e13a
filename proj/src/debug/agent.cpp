#include "mpx/debug/agent.hpp"

#include <atomic>
#include <cerrno>
#include <cstring>

#include "mpx/error.hpp"

namespace mpx::debug {

DebugAgent::DebugAgent(int rank, int size, AgentOptions options,
                       std::shared_ptr<const InspectableRegistry> inspectables)
    : options_(std::move(options)), state_(rank, size, std::move(inspectables), options_.suspend_on_start) {
  if (!options_.server) fail(ErrorKind::config, "debug agent supports server mode only");
  if (options_.port < 1024) fail(ErrorKind::config, "debug port must be in [1024, 65535]");
}

DebugAgent::~DebugAgent() { shutdown(0); }

void DebugAgent::register_thread(ThreadIndex thread) {
  std::lock_guard lock(state_mutex_);
  state_.register_thread(thread);
}

void DebugAgent::start() {
  auto listened = net::try_listen(options_.bind_address, options_.port);
  if (listened.error != 0) {
    std::string reason = listened.error == EADDRINUSE ? "address already in use" : std::strerror(listened.error);
    fail(ErrorKind::io, "rank " + std::to_string(state_.rank()) + ": debug agent cannot listen on port " +
                            std::to_string(options_.port) + ": " + reason);
  }
  listener_ = std::move(listened.socket);
  service_ = std::thread([this] { serve(); });
}

void DebugAgent::write_lines(const std::vector<std::string>& lines) {
  if (client_ == nullptr || lines.empty()) return;
  std::string block;
  for (const auto& l : lines) {
    block += l;
    block += '\n';
  }
  try {
    net::write_all(*client_, block);
  } catch (const Error&) {
    // The reader notices the broken connection and detaches.
  }
}

void DebugAgent::flush_events() {
  std::lock_guard wlock(write_mutex_);
  if (client_ == nullptr) return;  // held until a client attaches
  std::vector<std::string> events;
  {
    std::lock_guard lock(state_mutex_);
    events = state_.take_events();
  }
  write_lines(events);
}

void DebugAgent::on_probe(const probe::Site& site) {
  bool suspended;
  bool has_events;
  {
    std::lock_guard lock(state_mutex_);
    suspended = state_.arrive(site);
    has_events = state_.has_events();
    if (!suspended) state_.depart(site);
  }
  if (has_events) flush_events();
  if (suspended) {
    std::unique_lock lock(state_mutex_);
    released_.wait(lock, [&] { return state_.state(site.thread) != RunState::suspended; });
    state_.depart(site);
  }
}

void DebugAgent::serve() {
  while (true) {
    net::Socket client = net::accept(listener_);
    if (!client.valid()) return;
    {
      std::lock_guard wlock(write_mutex_);
      if (stopping_) return;
    }
    serve_client(std::move(client));
  }
}

void DebugAgent::serve_client(net::Socket client) {
  // A second client is turned away while this one is attached; accept on a
  // helper thread so the busy reply does not wait for this session.
  std::atomic<bool> attached{true};
  std::thread busy([this, &attached] {
    while (attached.load()) {
      net::Socket extra = net::accept(listener_);
      if (!extra.valid()) return;
      if (!attached.load()) {
        // Raced with the end of the session; hand back by closing. The
        // client may retry.
        return;
      }
      try {
        net::write_all(extra, "ERR busy\n");
      } catch (const Error&) {
      }
    }
  });

  {
    std::lock_guard wlock(write_mutex_);
    client_ = &client;
    std::vector<std::string> pending;
    {
      std::lock_guard lock(state_mutex_);
      pending = state_.take_events();
    }
    write_lines(pending);
  }

  net::LineReader reader(client);
  bool detached = false;
  while (!detached) {
    auto line = reader.next();
    if (!line) break;
    std::lock_guard wlock(write_mutex_);
    std::vector<std::string> response;
    std::vector<std::string> events;
    {
      std::lock_guard lock(state_mutex_);
      response = state_.handle(*line);
      events = state_.take_events();
      detached = *line == "DETACH" && response.size() == 1 && response[0] == "OK";
    }
    released_.notify_all();
    write_lines(events);
    write_lines(response);
  }

  {
    std::lock_guard wlock(write_mutex_);
    client_ = nullptr;
    std::lock_guard lock(state_mutex_);
    state_.detach();
  }
  released_.notify_all();
  client.shutdown();

  attached.store(false);
  // Wake the helper's accept() with a throwaway connection.
  net::Socket poke = net::try_connect("127.0.0.1", options_.port);
  busy.join();
}

void DebugAgent::shutdown(int exit_code) {
  {
    std::lock_guard wlock(write_mutex_);
    if (stopping_) return;
    stopping_ = true;
    if (client_ != nullptr) {
      write_lines({"EVT EXIT " + std::to_string(exit_code)});
      client_->shutdown();
    }
  }
  listener_.shutdown();
  if (service_.joinable()) service_.join();
  listener_.close();
}

}  // namespace mpx::debug
