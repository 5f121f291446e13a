#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace mpx::net {

/// Owning file descriptor for a TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();

  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept;
  void close() noexcept;
  /// shutdown(2) both directions; unblocks readers on other threads.
  void shutdown() noexcept;

 private:
  int fd_ = -1;
};

struct ListenResult {
  Socket socket;
  int error = 0;  // errno on failure, 0 on success
};

/// Binds and listens on address:port. Does not throw; EADDRINUSE and friends
/// are reported through `error`.
ListenResult try_listen(const std::string& address, std::uint16_t port, int backlog = 16);

/// Throws connect error when no connection could be made before `timeout`.
/// Retries refused connections until the deadline.
Socket connect(const std::string& address, std::uint16_t port,
               std::chrono::milliseconds timeout);

/// Single attempt; returns an invalid socket on failure.
Socket try_connect(const std::string& address, std::uint16_t port);

/// Blocks until a client connects; returns an invalid socket when the
/// listener was shut down.
Socket accept(const Socket& listener);

/// Throws transport error on failure. Never raises SIGPIPE.
void write_all(const Socket& s, std::span<const std::byte> data);
void write_all(const Socket& s, std::string_view data);

/// Reads exactly `out.size()` bytes. Returns false on clean EOF before the
/// first byte; throws transport error on EOF mid-buffer or socket error.
bool read_exact(const Socket& s, std::span<std::byte> out);

/// Buffered newline-delimited reader. Strips the trailing LF (and CR).
class LineReader {
 public:
  explicit LineReader(const Socket& s) : socket_(&s) {}
  /// nullopt on EOF or error.
  std::optional<std::string> next();

 private:
  const Socket* socket_;
  std::string buffer_;
};

std::uint32_t read_be32(const std::byte* p);
void write_be32(std::byte* p, std::uint32_t v);

/// True when a TCP listener could be bound on the port right now.
bool port_is_free(const std::string& address, std::uint16_t port);

}  // namespace mpx::net
