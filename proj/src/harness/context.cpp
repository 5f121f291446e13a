#include "mpx/harness/context.hpp"

#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "mpx/error.hpp"
#include "mpx/harness/probe.hpp"
#include "mpx/launcher/conf_file.hpp"
#include "mpx/net.hpp"

namespace mpx {

// ---------------------------------------------------------------------------
// Multicore: bounded in-process channels
// ---------------------------------------------------------------------------

class MulticoreFabric {
 public:
  MulticoreFabric(int size, std::size_t capacity)
      : size_(size), capacity_(capacity), closed_(static_cast<size_t>(size), false) {}

  int size() const { return size_; }

  void send(int src, int dest, Tag tag, Bytes payload) {
    std::unique_lock lock(mutex_);
    Channel& ch = channel(src, dest, tag);
    ch.not_full.wait(lock, [&] { return ch.queue.size() < capacity_ || closed_[dest]; });
    if (closed_[dest]) {
      fail(ErrorKind::transport, "rank " + std::to_string(dest) + " has finalized");
    }
    ch.queue.push_back(std::move(payload));
    ch.not_empty.notify_one();
  }

  Bytes recv(int src, int dest, Tag tag) {
    std::unique_lock lock(mutex_);
    Channel& ch = channel(src, dest, tag);
    ch.not_empty.wait(lock, [&] { return !ch.queue.empty() || closed_[src]; });
    if (ch.queue.empty()) {
      fail(ErrorKind::transport, "rank " + std::to_string(src) + " closed before sending");
    }
    Bytes out = std::move(ch.queue.front());
    ch.queue.pop_front();
    ch.not_full.notify_one();
    return out;
  }

  void close_rank(int rank) {
    std::lock_guard lock(mutex_);
    closed_[static_cast<size_t>(rank)] = true;
    for (auto& [key, ch] : channels_) {
      ch->not_empty.notify_all();
      ch->not_full.notify_all();
    }
  }

 private:
  struct Channel {
    std::deque<Bytes> queue;
    std::condition_variable not_empty;
    std::condition_variable not_full;
  };

  Channel& channel(int src, int dest, Tag tag) {
    auto& slot = channels_[{src, dest, tag}];
    if (!slot) slot = std::make_unique<Channel>();
    return *slot;
  }

  int size_;
  std::size_t capacity_;
  std::mutex mutex_;
  std::vector<bool> closed_;
  std::map<std::tuple<int, int, Tag>, std::unique_ptr<Channel>> channels_;
};

std::shared_ptr<MulticoreFabric> make_multicore_fabric(int size, std::size_t capacity) {
  if (size < 1) fail(ErrorKind::argument, "fabric size must be >= 1");
  if (capacity < 1) fail(ErrorKind::argument, "channel capacity must be >= 1");
  return std::make_shared<MulticoreFabric>(size, capacity);
}

namespace {

class MulticoreTransport final : public Transport {
 public:
  MulticoreTransport(int rank, std::shared_ptr<MulticoreFabric> fabric)
      : rank_(rank), fabric_(std::move(fabric)) {}
  ~MulticoreTransport() override { close(); }

  void send(int dest, Tag tag, std::span<const std::byte> payload) override {
    fabric_->send(rank_, dest, tag, Bytes(payload.begin(), payload.end()));
  }
  Bytes recv(int src, Tag tag) override { return fabric_->recv(src, rank_, tag); }
  void close() override {
    if (!closed_) {
      closed_ = true;
      fabric_->close_rank(rank_);
    }
  }

 private:
  int rank_;
  std::shared_ptr<MulticoreFabric> fabric_;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// Cluster: TCP, one outbound stream per peer, framed as
// [tag:be32][length:be32][payload]; handshake is [rank:be32].
// ---------------------------------------------------------------------------

class ClusterTransport final : public Transport {
 public:
  ClusterTransport(int rank, launcher::ConfFile conf, std::chrono::seconds timeout)
      : rank_(rank),
        conf_(std::move(conf)),
        timeout_(timeout),
        outgoing_(static_cast<size_t>(conf_.size())),
        src_closed_(static_cast<size_t>(conf_.size()), false) {
    auto port = data_port(conf_.for_rank(rank).port);
    auto listened = net::try_listen("0.0.0.0", port, 64);
    if (listened.error != 0) {
      fail(ErrorKind::transport, "rank " + std::to_string(rank) + " cannot listen on data port " +
                                     std::to_string(port) + ": " + std::strerror(listened.error));
    }
    listener_ = std::move(listened.socket);
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  ~ClusterTransport() override { close(); }

  void send(int dest, Tag tag, std::span<const std::byte> payload) override {
    if (payload.size() > 0x7fffffffu) fail(ErrorKind::argument, "payload larger than 2^31-1 bytes");
    if (dest == rank_) {
      deliver(rank_, tag, Bytes(payload.begin(), payload.end()));
      return;
    }
    net::Socket& s = outgoing(dest);
    std::byte header[8];
    net::write_be32(header, static_cast<std::uint32_t>(tag));
    net::write_be32(header + 4, static_cast<std::uint32_t>(payload.size()));
    net::write_all(s, std::span<const std::byte>(header, 8));
    if (!payload.empty()) net::write_all(s, payload);
  }

  Bytes recv(int src, Tag tag) override {
    std::unique_lock lock(mutex_);
    auto& queue = mailbox_[{src, tag}];
    arrived_.wait(lock, [&] { return !queue.empty() || src_closed_[src] || closing_; });
    if (queue.empty()) {
      fail(ErrorKind::transport, "rank " + std::to_string(src) + " closed before sending");
    }
    Bytes out = std::move(queue.front());
    queue.pop_front();
    return out;
  }

  void close() override {
    {
      std::lock_guard lock(mutex_);
      if (closing_) return;
      closing_ = true;
    }
    arrived_.notify_all();
    for (auto& s : outgoing_) s.close();
    listener_.shutdown();
    if (acceptor_.joinable()) acceptor_.join();
    listener_.close();
    {
      std::lock_guard lock(mutex_);
      for (auto& s : incoming_) s.shutdown();
    }
    for (auto& t : readers_) t.join();
  }

 private:
  net::Socket& outgoing(int dest) {
    auto& s = outgoing_[static_cast<size_t>(dest)];
    if (!s.valid()) {
      const auto& rec = conf_.for_rank(dest);
      s = net::connect(rec.address, data_port(rec.port), timeout_);
      std::byte hello[4];
      net::write_be32(hello, static_cast<std::uint32_t>(rank_));
      net::write_all(s, std::span<const std::byte>(hello, 4));
    }
    return s;
  }

  void accept_loop() {
    while (true) {
      net::Socket s = net::accept(listener_);
      if (!s.valid()) return;
      std::lock_guard lock(mutex_);
      if (closing_) return;
      incoming_.push_back(std::move(s));
      const net::Socket* sock = &incoming_.back();
      readers_.emplace_back([this, sock] { read_loop(*sock); });
    }
  }

  void read_loop(const net::Socket& s) {
    int src = -1;
    try {
      std::byte hello[4];
      if (!net::read_exact(s, hello)) return;
      src = static_cast<int>(net::read_be32(hello));
      if (src < 0 || src >= conf_.size()) return;
      while (true) {
        std::byte header[8];
        if (!net::read_exact(s, header)) break;
        auto tag = static_cast<Tag>(net::read_be32(header));
        auto length = net::read_be32(header + 4);
        Bytes payload(length);
        if (length > 0 && !net::read_exact(s, payload)) break;
        deliver(src, tag, std::move(payload));
      }
    } catch (const Error&) {
    }
    if (src >= 0) {
      std::lock_guard lock(mutex_);
      src_closed_[static_cast<size_t>(src)] = true;
    }
    arrived_.notify_all();
  }

  void deliver(int src, Tag tag, Bytes payload) {
    {
      std::lock_guard lock(mutex_);
      mailbox_[{src, tag}].push_back(std::move(payload));
    }
    arrived_.notify_all();
  }

  int rank_;
  launcher::ConfFile conf_;
  std::chrono::seconds timeout_;
  net::Socket listener_;
  std::thread acceptor_;
  std::vector<net::Socket> outgoing_;

  std::mutex mutex_;
  std::condition_variable arrived_;
  std::map<std::pair<int, Tag>, std::deque<Bytes>> mailbox_;
  std::vector<bool> src_closed_;
  std::deque<net::Socket> incoming_;  // deque: stable addresses for readers
  std::vector<std::thread> readers_;
  bool closing_ = false;
};

}  // namespace

// ---------------------------------------------------------------------------

CommContext::CommContext(int rank, int size, Mode mode, std::unique_ptr<Transport> transport)
    : rank_(rank),
      size_(size),
      mode_(mode),
      transport_(std::move(transport)),
      inspectables_(std::make_shared<InspectableRegistry>()) {}

CommContext::~CommContext() {
  if (transport_) transport_->close();
}

CommContext::CommContext(CommContext&&) noexcept = default;
CommContext& CommContext::operator=(CommContext&&) noexcept = default;

void CommContext::require_open(const char* op) const {
  if (!transport_) fail(ErrorKind::state, std::string(op) + " after finalize");
}

void CommContext::check_peer(int peer, const char* what) const {
  if (peer < 0 || peer >= size_) {
    fail(ErrorKind::argument, std::string(what) + " " + std::to_string(peer) + " out of range [0, " +
                                  std::to_string(size_) + ")");
  }
}

void CommContext::send(int dest, Tag tag, std::span<const std::byte> payload) {
  require_open("send");
  check_peer(dest, "dest");
  if (tag == reserved_tag) fail(ErrorKind::argument, "tag is reserved");
  probe::Scope scope("MPX_Send");
  transport_->send(dest, tag, payload);
}

void CommContext::send(int dest, Tag tag, std::string_view payload) {
  send(dest, tag, std::as_bytes(std::span(payload.data(), payload.size())));
}

Bytes CommContext::recv(int src, Tag tag) {
  require_open("recv");
  check_peer(src, "src");
  if (tag == reserved_tag) fail(ErrorKind::argument, "tag is reserved");
  probe::Scope scope("MPX_Recv");
  return transport_->recv(src, tag);
}

std::string CommContext::recv_string(int src, Tag tag) {
  Bytes b = recv(src, tag);
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

void CommContext::barrier() {
  require_open("barrier");
  probe::Scope scope("MPX_Barrier");
  if (size_ == 1) return;
  if (rank_ == 0) {
    for (int r = 1; r < size_; ++r) transport_->recv(r, reserved_tag);
    for (int r = 1; r < size_; ++r) transport_->send(r, reserved_tag, {});
  } else {
    transport_->send(0, reserved_tag, {});
    transport_->recv(0, reserved_tag);
  }
}

void CommContext::finalize() {
  if (transport_) {
    transport_->close();
    transport_.reset();
  }
}

void CommContext::register_inspectable(const std::string& name, InspectProvider provider) {
  if (name.empty()) fail(ErrorKind::argument, "inspectable name must be non-empty");
  inspectables_->add(name, current_thread_index(), std::move(provider));
}

CommContext init(const Environment& env, std::shared_ptr<MulticoreFabric> fabric) {
  if (env.size < 1) fail(ErrorKind::config, "size must be >= 1");
  if (env.rank < 0 || env.rank >= env.size) {
    fail(ErrorKind::config, "rank " + std::to_string(env.rank) + " out of range");
  }
  if (env.mode == Mode::multicore) {
    if (!fabric) {
      if (env.size != 1) fail(ErrorKind::config, "multicore rank needs a shared fabric");
      fabric = make_multicore_fabric(1);
    }
    if (fabric->size() != env.size) fail(ErrorKind::config, "fabric size mismatch");
    return CommContext(env.rank, env.size, env.mode,
                       std::make_unique<MulticoreTransport>(env.rank, std::move(fabric)));
  }
  auto conf = launcher::ConfFile::read(env.conf_path);
  if (conf.size() != env.size) {
    fail(ErrorKind::config, "conf lists " + std::to_string(conf.size()) + " ranks, MPX_SIZE is " +
                                std::to_string(env.size));
  }
  return CommContext(env.rank, env.size, env.mode,
                     std::make_unique<ClusterTransport>(env.rank, std::move(conf), env.connect_timeout));
}

}  // namespace mpx
