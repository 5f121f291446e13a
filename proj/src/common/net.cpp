#include "mpx/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "mpx/error.hpp"

namespace mpx::net {

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() noexcept {
  int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

namespace {

bool resolve(const std::string& address, std::uint16_t port, sockaddr_in& out) {
  std::memset(&out, 0, sizeof(out));
  out.sin_family = AF_INET;
  out.sin_port = htons(port);
  if (address.empty() || address == "*" || address == "0.0.0.0") {
    out.sin_addr.s_addr = htonl(INADDR_ANY);
    return true;
  }
  if (::inet_pton(AF_INET, address.c_str(), &out.sin_addr) == 1) return true;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(address.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) return false;
  out.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return true;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

ListenResult try_listen(const std::string& address, std::uint16_t port, int backlog) {
  sockaddr_in addr{};
  if (!resolve(address, port, addr)) return {Socket{}, EADDRNOTAVAIL};
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) return {Socket{}, errno};
  // Linux still refuses a second listener with SO_REUSEADDR; it only skips TIME_WAIT.
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    return {Socket{}, errno};
  }
  if (::listen(s.fd(), backlog) != 0) return {Socket{}, errno};
  return {std::move(s), 0};
}

Socket try_connect(const std::string& address, std::uint16_t port) {
  sockaddr_in addr{};
  if (!resolve(address, port, addr)) return {};
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) return {};
  if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) return {};
  set_nodelay(s.fd());
  return s;
}

Socket connect(const std::string& address, std::uint16_t port,
               std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  auto backoff = std::chrono::milliseconds(5);
  while (true) {
    Socket s = try_connect(address, port);
    if (s.valid()) return s;
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(ErrorKind::connect, "cannot connect to " + address + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::milliseconds(100));
  }
}

Socket accept(const Socket& listener) {
  while (true) {
    int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      set_nodelay(fd);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return {};
  }
}

void write_all(const Socket& s, std::span<const std::byte> data) {
  size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(s.fd(), data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorKind::transport, std::string("send failed: ") + std::strerror(errno));
    }
    done += static_cast<size_t>(n);
  }
}

void write_all(const Socket& s, std::string_view data) {
  write_all(s, std::as_bytes(std::span(data.data(), data.size())));
}

bool read_exact(const Socket& s, std::span<std::byte> out) {
  size_t done = 0;
  while (done < out.size()) {
    ssize_t n = ::recv(s.fd(), out.data() + done, out.size() - done, 0);
    if (n == 0) {
      if (done == 0) return false;
      fail(ErrorKind::transport, "peer closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (done == 0 && (errno == ECONNRESET || errno == EBADF || errno == ENOTCONN)) return false;
      fail(ErrorKind::transport, std::string("recv failed: ") + std::strerror(errno));
    }
    done += static_cast<size_t>(n);
  }
  return true;
}

std::optional<std::string> LineReader::next() {
  while (true) {
    auto pos = buffer_.find('\n');
    if (pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    char chunk[4096];
    ssize_t n = ::recv(socket_->fd(), chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

std::uint32_t read_be32(const std::byte* p) {
  return (std::to_integer<std::uint32_t>(p[0]) << 24) | (std::to_integer<std::uint32_t>(p[1]) << 16) |
         (std::to_integer<std::uint32_t>(p[2]) << 8) | std::to_integer<std::uint32_t>(p[3]);
}

void write_be32(std::byte* p, std::uint32_t v) {
  p[0] = static_cast<std::byte>(v >> 24);
  p[1] = static_cast<std::byte>(v >> 16);
  p[2] = static_cast<std::byte>(v >> 8);
  p[3] = static_cast<std::byte>(v);
}

bool port_is_free(const std::string& address, std::uint16_t port) {
  return try_listen(address, port).error == 0;
}

}  // namespace mpx::net
